use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use skillgraph_core::enrichment::{enrich, load_postings, EnrichmentConfig, PostingDataset};
use skillgraph_core::fixture::{write_fixture, FixtureSpec, MANIFEST_FILE, POSTINGS_FILE};
use skillgraph_core::graph::{build_base_graph, KnowledgeGraph, NodeId, NodeKind};
use skillgraph_core::linkpred::{
    evaluate, rank_candidate_skills, ratio_sweep, split_edges, train_node2vec_scorer, write_sweep_csv,
    ClassifierConfig, EdgeClassifier, EdgeSplit, LinkScorer, Node2VecParams, Node2VecScorer, NodeEmbeddings,
    PreferentialAttachment, SplitConfig,
};
use skillgraph_core::matcher::{MatcherConfig, SkillMatcher};
use skillgraph_core::pathfinder::{build_transition_graph, distance_distribution, nearest_occupations, shortest_transition};
use skillgraph_core::relevance::{build_all_levels, build_corpus, relevance_tree, top_k_skills};
use skillgraph_core::taxonomy::{load_skills, load_taxonomy, SkillRecord, TaxonomyPaths};

use crate::args::*;

/// Files read and written by one command, for the run manifest.
pub struct Run {
    pub out: PathBuf,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Run {
    fn input<'a>(&mut self, path: &'a Path) -> Result<&'a Path> {
        if !path.is_file() {
            bail!("input file not found: {}", path.display());
        }
        self.inputs.push(path.to_path_buf());
        Ok(path)
    }

    fn output(&mut self, name: &str) -> PathBuf {
        let path = self.out.join(name);
        self.outputs.push(path.clone());
        path
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        let path = self.output(name);
        fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
        Ok(text)
    }

    fn write_csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow!("{e}"))?;
        let path = self.output(name);
        fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(String::from_utf8(bytes)?)
    }

    fn graph(&mut self, arg: &GraphArg) -> Result<KnowledgeGraph> {
        let path = self.input(&arg.graph)?;
        KnowledgeGraph::load(path).with_context(|| format!("loading graph {}", path.display()))
    }

    fn split(&mut self, path: &Path) -> Result<EdgeSplit> {
        let path = self.input(path)?;
        EdgeSplit::load(path).with_context(|| format!("loading split {}", path.display()))
    }

    fn postings(&mut self, path: &Path) -> Result<PostingDataset> {
        let path = self.input(path)?;
        load_postings(path).with_context(|| format!("loading postings {}", path.display()))
    }

    fn catalog(&mut self, path: &Path) -> Result<Vec<SkillRecord>> {
        let path = self.input(path)?;
        let skills = load_skills(path).with_context(|| format!("loading skills {}", path.display()))?;
        Ok(skills.into_values().collect())
    }

    fn node2vec(&mut self, model: &ModelArgs) -> Result<Node2VecScorer> {
        let (Some(emb), Some(clf)) = (&model.embeddings, &model.classifier) else {
            bail!("n2v scoring needs --embeddings and --classifier");
        };
        let emb = self.input(emb)?;
        let clf = self.input(clf)?;
        Ok(Node2VecScorer {
            embeddings: NodeEmbeddings::load(emb).with_context(|| format!("loading embeddings {}", emb.display()))?,
            classifier: EdgeClassifier::load(clf).with_context(|| format!("loading classifier {}", clf.display()))?,
        })
    }
}

fn matcher(catalog: &[SkillRecord], args: &MatchArgs) -> Result<SkillMatcher> {
    Ok(SkillMatcher::new(
        catalog,
        MatcherConfig {
            ngram_n: args.ngram_n,
            threshold: args.match_threshold,
        },
    )?)
}

fn occupation(g: &KnowledgeGraph, code: &str) -> Result<NodeId> {
    let id = NodeId::occupation(code);
    if !g.contains(&id) {
        bail!("occupation {code} is not in the graph");
    }
    Ok(id)
}

pub fn build(run: &mut Run, args: &BuildArgs) -> Result<()> {
    let paths = TaxonomyPaths::in_dir(&args.taxonomy.taxonomy_dir);
    for p in paths.all() {
        run.input(p)?;
    }
    let bundle = load_taxonomy(&paths)?;
    let g = build_base_graph(&bundle)?;
    let path = run.output("graph.json");
    g.save(&path)?;
    print!("{}", run.write_json("stats.json", &g.stats())?);
    Ok(())
}

pub fn enrich_graph(run: &mut Run, args: &EnrichArgs) -> Result<()> {
    let g = run.graph(&args.graph)?;
    let catalog = run.catalog(&args.matching.skills)?;
    let postings = run.postings(&args.matching.postings)?;
    let matcher = matcher(&catalog, &args.matching)?;
    let config = EnrichmentConfig {
        min_confidence: args.matching.min_confidence,
        min_count: args.min_count,
    };
    let (enriched, report) = enrich(&g, &postings, &matcher, &config)?;
    let path = run.output("enriched_graph.json");
    enriched.save(&path)?;
    print!("{}", run.write_json("enrichment_report.json", &report)?);
    Ok(())
}

pub fn gen_fixture(run: &mut Run, args: &FixtureArgs) -> Result<()> {
    let spec = FixtureSpec {
        n_occupations: args.n_occupations,
        n_skills: args.n_skills,
        links_per_occupation: args.links_per_occupation,
        n_postings: args.n_postings,
        mentions_per_posting: args.mentions_per_posting,
        mention_noise: args.mention_noise,
        seed: run.seed,
    };
    let manifest = write_fixture(&run.out, &spec)?;
    let paths = TaxonomyPaths::in_dir(&run.out);
    for p in paths.all() {
        run.outputs.push(p.to_path_buf());
    }
    run.outputs.push(run.out.join(POSTINGS_FILE));
    run.outputs.push(run.out.join(MANIFEST_FILE));
    println!(
        "{} ISCO groups, {} occupations, {} skills, {} links, {} postings, {} mentions ({} perturbed)",
        manifest.isco_groups,
        manifest.esco_occupations,
        manifest.skills,
        manifest.links,
        manifest.postings,
        manifest.mentions,
        manifest.perturbed_mentions
    );
    Ok(())
}

pub fn stats(run: &mut Run, args: &GraphArg) -> Result<()> {
    let g = run.graph(args)?;
    print!("{}", run.write_json("stats.json", &g.stats())?);
    Ok(())
}

pub fn linkpred(run: &mut Run, cmd: &LinkpredCommand) -> Result<()> {
    match cmd {
        LinkpredCommand::Split(a) => split(run, a),
        LinkpredCommand::Train(a) => train(run, a),
        LinkpredCommand::Eval(a) => eval(run, a),
        LinkpredCommand::Sweep(a) => sweep(run, a),
        LinkpredCommand::Suggest(a) => suggest(run, a),
    }
}

fn split(run: &mut Run, args: &SplitArgs) -> Result<()> {
    let g = run.graph(&args.graph)?;
    let ratios: [f64; 3] = args
        .ratios
        .as_slice()
        .try_into()
        .map_err(|_| anyhow!("--ratios takes three fractions, got {}", args.ratios.len()))?;
    let split = split_edges(
        &g,
        &SplitConfig {
            ratios,
            neg_ratio: args.neg_ratio,
            seed: run.seed,
        },
    )?;
    let path = run.output("split.json");
    split.save(&path)?;
    println!(
        "positives {}/{}/{}, negatives {}/{}/{}",
        split.train_pos.len(),
        split.val_pos.len(),
        split.test_pos.len(),
        split.train_neg.len(),
        split.val_neg.len(),
        split.test_neg.len()
    );
    Ok(())
}

fn train(run: &mut Run, args: &TrainArgs) -> Result<()> {
    let g = run.graph(&args.graph)?;
    let split = run.split(&args.split)?;
    let n = &args.node2vec;
    let params = Node2VecParams {
        dimensions: n.dimensions,
        walk_length: n.walk_length,
        num_walks_per_node: n.walks_per_node,
        total_walks: n.total_walks,
        p: n.p,
        q: n.q,
        window: n.window,
        epochs: n.epochs,
        negative_samples: n.negative_samples,
        learning_rate: n.learning_rate,
        seed: run.seed,
    };
    let c = &args.classifier;
    let clf = ClassifierConfig {
        learning_rate: c.clf_learning_rate,
        l2: c.l2,
        max_epochs: c.max_epochs,
        batch_size: c.batch_size,
        patience: c.patience,
        seed: run.seed,
    };
    let scorer = train_node2vec_scorer(&g, &split, &params, &clf)?;
    let emb = run.output("embeddings.csv");
    scorer.embeddings.save(&emb)?;
    let model = run.output("classifier.json");
    scorer.classifier.save(&model)?;
    let val = evaluate(&scorer, &split.val_pos, &split.val_neg)?;
    println!("validation class-1 F1 {:.4}", val.class1.f1);
    Ok(())
}

fn scorer<'g>(run: &mut Run, g: &'g KnowledgeGraph, method: Method, model: &ModelArgs) -> Result<Box<dyn LinkScorer + 'g>> {
    Ok(match method {
        Method::Pa => Box::new(PreferentialAttachment::new(g)),
        Method::N2v => Box::new(run.node2vec(model)?),
    })
}

fn eval(run: &mut Run, args: &EvalArgs) -> Result<()> {
    let g = run.graph(&args.graph)?;
    let split = run.split(&args.split)?;
    let methods = if args.methods.is_empty() {
        let mut m = vec![Method::Pa];
        if args.model.embeddings.is_some() {
            m.push(Method::N2v);
        }
        m
    } else {
        args.methods.clone()
    };
    let mut report = serde_json::Map::new();
    for method in methods {
        let s = scorer(run, &g, method, &args.model)?;
        let metrics = evaluate(s.as_ref(), &split.test_pos, &split.test_neg)?;
        report.insert(serde_json::to_value(method)?.as_str().unwrap_or_default().to_string(), serde_json::to_value(metrics)?);
    }
    print!("{}", run.write_json("metrics.json", &report)?);
    Ok(())
}

/// `1..7` (inclusive) or a comma-separated list.
pub fn parse_ratios(spec: &str) -> Result<Vec<usize>> {
    let ratios: Vec<usize> = if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().with_context(|| format!("bad ratio range {spec}"))?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().with_context(|| format!("bad ratio range {spec}"))?;
        (lo..=hi).collect()
    } else {
        spec.split(',')
            .map(|r| r.trim().parse().with_context(|| format!("bad ratio {r}")))
            .collect::<Result<_>>()?
    };
    if ratios.is_empty() || ratios.contains(&0) {
        bail!("ratios must be positive integers, got {spec}");
    }
    Ok(ratios)
}

fn sweep(run: &mut Run, args: &SweepArgs) -> Result<()> {
    let ratios = parse_ratios(&args.ratios)?;
    let g = run.graph(&args.graph)?;
    let split = run.split(&args.split)?;
    let s = scorer(run, &g, args.method, &args.model)?;
    let points = ratio_sweep(s.as_ref(), &split.test_pos, &g, &ratios, run.seed)?;
    let name = format!("sweep_{}.csv", serde_json::to_value(args.method)?.as_str().unwrap_or_default());
    let path = run.output(&name);
    write_sweep_csv(&path, &points)?;
    print!("{}", fs::read_to_string(&path)?);
    Ok(())
}

fn suggest(run: &mut Run, args: &SuggestArgs) -> Result<()> {
    let g = run.graph(&args.graph)?;
    occupation(&g, &args.occupation)?;
    let s = scorer(run, &g, args.method, &args.model)?;
    let ranked = rank_candidate_skills(s.as_ref(), &g, &args.occupation, args.k)?;
    print!("{}", run.write_csv(&format!("suggestions_{}.csv", args.occupation), &ranked)?);
    Ok(())
}

pub fn path(run: &mut Run, args: &PathArgs) -> Result<()> {
    let g = run.graph(&args.graph)?;
    let from = occupation(&g, &args.from)?;
    let to = occupation(&g, &args.to)?;
    let tg = build_transition_graph(&g, args.max_distance)?;
    let path = shortest_transition(&tg, &from, &to)?;
    print!("{}", run.write_json(&format!("path_{}_{}.json", args.from, args.to), &path)?);
    Ok(())
}

#[derive(Serialize)]
struct DistanceRow<'a> {
    a: &'a str,
    b: &'a str,
    distance: f64,
}

pub fn distances(run: &mut Run, args: &DistancesArgs) -> Result<()> {
    let g = run.graph(&args.graph)?;
    let (kind, name) = match args.kind {
        Kind::Occupation => (NodeKind::Occupation, "occupation"),
        Kind::Skill => (NodeKind::Skill, "skill"),
    };
    let (stats, pairs) = distance_distribution(&g, kind);
    let rows: Vec<DistanceRow> = pairs
        .iter()
        .map(|p| DistanceRow {
            a: &p.a.key,
            b: &p.b.key,
            distance: p.distance,
        })
        .collect();
    run.write_csv(&format!("distances_{name}.csv"), &rows)?;
    print!("{}", run.write_json(&format!("distance_stats_{name}.json"), &stats)?);
    Ok(())
}

#[derive(Serialize)]
struct NearestRow<'a> {
    occupation: &'a str,
    neighbor: &'a str,
    distance: f64,
}

pub fn nearest(run: &mut Run, args: &NearestArgs) -> Result<()> {
    let g = run.graph(&args.graph)?;
    let id = occupation(&g, &args.occupation)?;
    let ranked = nearest_occupations(&g, &id, args.k)?;
    let rows: Vec<NearestRow> = ranked
        .iter()
        .map(|(n, d)| NearestRow {
            occupation: &args.occupation,
            neighbor: &n.key,
            distance: *d,
        })
        .collect();
    print!("{}", run.write_csv(&format!("nearest_{}.csv", args.occupation), &rows)?);
    Ok(())
}

#[derive(Serialize)]
struct RelevanceRow<'a> {
    group: &'a str,
    skill_id: &'a str,
    label: &'a str,
    tf: f64,
    idf: f64,
    score: f64,
}

pub fn relevance(run: &mut Run, args: &RelevanceArgs) -> Result<()> {
    if let Some(RelevanceCommand::Tree(t)) = &args.tree {
        return tree(run, t);
    }
    let (Some(m), Some(level), Some(group)) = (&args.matching, args.level, &args.group) else {
        bail!("relevance needs --skills, --postings, --level and --group");
    };
    let catalog = run.catalog(&m.skills)?;
    let postings = run.postings(&m.postings)?;
    let matcher = matcher(&catalog, m)?;
    let corpus = build_corpus(&postings, &matcher, m.min_confidence, level)?;
    let top = top_k_skills(&corpus, group, args.k)?;
    let rows: Vec<RelevanceRow> = top
        .iter()
        .map(|s| RelevanceRow {
            group: &s.group_code,
            skill_id: &s.skill_id,
            label: matcher.label(&s.skill_id).unwrap_or_default(),
            tf: s.tf,
            idf: s.idf,
            score: s.score,
        })
        .collect();
    print!("{}", run.write_csv(&format!("relevance_L{level}_{group}.csv"), &rows)?);
    Ok(())
}

fn tree(run: &mut Run, args: &TreeArgs) -> Result<()> {
    let catalog = run.catalog(&args.matching.skills)?;
    let postings = run.postings(&args.matching.postings)?;
    let matcher = matcher(&catalog, &args.matching)?;
    let corpora = build_all_levels(&postings, &matcher, args.matching.min_confidence)?;
    let tree = relevance_tree(&corpora, &args.major, args.k)?;
    print!("{}", run.write_json(&format!("relevance_tree_{}.json", args.major), &tree)?);
    Ok(())
}
