use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use weaksocial::coattend::{train_on, CoAttentionModel, Mode};
use weaksocial::config::RunConfig;
use weaksocial::corpus::{build_vocab, vectorize_tfidf, write_records, Corpus};
use weaksocial::harness::report::{
    ablation_csv, explanation_csv, metrics_csv, sweep_svg, Manifest, EXPLANATION_HEADER,
};
use weaksocial::harness::{
    ablation_study, cross_validate, decide, early_detection_sweep, evaluate_classification, explanation_scores,
    mean_f1, weak_view, CellContext, MetricsRow,
};
use weaksocial::synthgen::{self, GroundTruth, GroundTruthRecord, GROUND_TRUTH_FILE};
use weaksocial::trifn::{self, Supervision};
use weaksocial::weaksup::{DistributionRecord, Lexicon};

#[derive(Parser)]
#[command(name = "weaksocial", version, about = "Fake-news detection with weak social supervision")]
struct Cli {
    /// Overrides every seed in the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (model file for train-trifn and train-defend)
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Sentiment lexicon (`token<TAB>valence`); bundled one by default
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and write it back in canonical form with a summary
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Generate a synthetic corpus with planted structure
    Synth,
    /// Apply the labeling rules and write votes and label distributions
    WeakLabel {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Fit the factorization detector on all labeled items
    TrainTrifn {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Train the co-attention detector on all labeled items
    TrainDefend {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "full")]
        mode: Mode,
    },
    /// Cross-validate the configured methods at one cutoff, or score a
    /// co-attention model on the labeled items
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Ranked sentences and comments with attention weights
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// All news items when omitted
        #[arg(long)]
        news_id: Option<String>,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Accuracy against engagement cutoff for every configured method
    SweepEarly {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Full co-attention model against its three ablations
    AblateDefend {
        #[arg(long)]
        corpus: PathBuf,
    },
}

struct Run {
    cfg: RunConfig,
    seed: u64,
    out: PathBuf,
    lexicon: Lexicon,
    inputs: Vec<PathBuf>,
}

impl Run {
    fn corpus(&mut self, dir: &Path) -> Result<Corpus> {
        self.inputs.extend(Corpus::files_in(dir));
        Corpus::load_dir(dir).with_context(|| format!("loading corpus from {}", dir.display()))
    }

    fn ground_truth(&mut self, dir: &Path) -> Result<Option<Vec<GroundTruthRecord>>> {
        let path = dir.join(GROUND_TRUTH_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        self.inputs.push(path);
        Ok(Some(GroundTruth::load_records(dir)?))
    }

    fn content(&self, corpus: &Corpus) -> ndarray::Array2<f64> {
        let e = &self.cfg.experiment;
        vectorize_tfidf(corpus, &build_vocab(corpus, e.vocab_min_count, e.vocab_max_size))
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out)?;
        Ok(&self.out)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.out_dir()?.join(name), text)?;
        Ok(())
    }

    /// Manifest in the output directory listing `outputs` by file name.
    fn finish(&self, command: &str, outputs: &[&str], manifest_path: PathBuf) -> Result<()> {
        let mut m = Manifest::new(command, self.seed, &self.cfg)?;
        m.add_inputs(self.inputs.iter().map(PathBuf::as_path))?;
        m.outputs = outputs.iter().map(|s| s.to_string()).collect();
        m.write(&manifest_path)?;
        log::info!("{command}: wrote {}", outputs.join(", "));
        Ok(())
    }

    fn finish_dir(&self, command: &str, outputs: &[&str]) -> Result<()> {
        self.finish(command, outputs, self.out_dir()?.join("manifest.json"))
    }

    /// Manifest next to a model file: `<model>.manifest.json`.
    fn finish_model(&self, command: &str) -> Result<()> {
        let name = self.out.file_name().context("--out must name a file")?.to_string_lossy().into_owned();
        let path = self.out.with_file_name(format!("{name}.manifest.json"));
        self.finish(command, &[&name], path)
    }
}

#[derive(Serialize)]
struct CorpusSummary {
    news: usize,
    fake: usize,
    real: usize,
    unlabeled: usize,
    users: usize,
    publishers: usize,
    engagements: usize,
    comments: usize,
    edges: usize,
}

#[derive(Serialize)]
struct ExplanationRecord<'a> {
    news_id: &'a str,
    p_fake: f64,
    kind: &'static str,
    rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comment_id: Option<&'a str>,
    weight: f64,
    text: &'a str,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.trifn.seed = s;
        cfg.coattend.seed = s;
        cfg.synth.seed = s;
        cfg.experiment.seeds = vec![s];
    }
    let lexicon = match &cli.lexicon {
        Some(p) => Lexicon::load(p).with_context(|| format!("loading lexicon {}", p.display()))?,
        None => Lexicon::bundled(),
    };
    let mut inputs: Vec<PathBuf> = cli.config.iter().chain(&cli.lexicon).cloned().collect();
    inputs.dedup();
    let mut run = Run {
        seed: cli.seed.unwrap_or(cfg.trifn.seed),
        cfg,
        out: cli.out,
        lexicon,
        inputs,
    };

    match cli.command {
        Command::Ingest { corpus } => {
            let c = run.corpus(&corpus)?;
            let gold = c.gold_labels();
            let fake = gold.iter().filter(|g| g.is_some_and(|l| l.is_fake())).count();
            let labeled = gold.iter().filter(|g| g.is_some()).count();
            let summary = CorpusSummary {
                news: c.news().len(),
                fake,
                real: labeled - fake,
                unlabeled: c.news().len() - labeled,
                users: c.users().len(),
                publishers: c.publishers().len(),
                engagements: c.engagements().len(),
                comments: (0..c.news().len()).map(|j| c.comment_count(j)).sum(),
                edges: c.edges().len(),
            };
            c.save_dir(run.out_dir()?)?;
            run.write("summary.json", &(serde_json::to_string_pretty(&summary)? + "\n"))?;
            let mut outputs: Vec<String> = Corpus::files_in(Path::new(""))
                .iter()
                .map(|p| p.display().to_string())
                .collect();
            outputs.push("summary.json".into());
            let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
            run.finish_dir("ingest", &refs)?;
        }
        Command::Synth => {
            let (c, truth) = synthgen::generate(&run.cfg.synth)?;
            let dir = run.out_dir()?.to_path_buf();
            c.save_dir(&dir)?;
            truth.save(&dir)?;
            let mut outputs: Vec<String> = Corpus::files_in(Path::new(""))
                .iter()
                .map(|p| p.display().to_string())
                .collect();
            outputs.push(GROUND_TRUTH_FILE.into());
            let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
            run.seed = run.cfg.synth.seed;
            run.finish_dir("synth", &refs)?;
        }
        Command::WeakLabel { corpus, cutoff } => {
            let c = run.corpus(&corpus)?;
            let content = run.content(&c);
            let view = weak_view(&c, &content, &c.gold_labels(), cutoff, &run.lexicon, &run.cfg.weaksup)?;
            let dir = run.out_dir()?.to_path_buf();
            write_records(&dir.join("votes.jsonl"), &view.votes)?;
            let dists: Vec<DistributionRecord> = c
                .news()
                .iter()
                .zip(&view.distributions)
                .map(|(n, d)| DistributionRecord {
                    news_id: n.id.clone(),
                    p_fake: d.p_fake,
                })
                .collect();
            write_records(&dir.join("distributions.jsonl"), &dists)?;
            run.write("rule_weights.json", &(serde_json::to_string_pretty(&view.weights)? + "\n"))?;
            run.finish_dir("weak-label", &["votes.jsonl", "distributions.jsonl", "rule_weights.json"])?;
        }
        Command::TrainTrifn {
            corpus,
            cutoff,
            d,
            alpha,
            beta,
            gamma,
            eta,
            lambda,
        } => {
            let h = &mut run.cfg.trifn;
            if let Some(v) = d {
                h.d = v;
            }
            for (slot, v) in [
                (&mut h.alpha, alpha),
                (&mut h.beta, beta),
                (&mut h.gamma, gamma),
                (&mut h.eta, eta),
                (&mut h.lambda, lambda),
            ] {
                if let Some(v) = v {
                    *slot = v;
                }
            }
            run.seed = run.cfg.trifn.seed;
            let c = run.corpus(&corpus)?;
            let content = run.content(&c);
            let gold = c.gold_labels();
            let view = weak_view(&c, &content, &gold, cutoff, &run.lexicon, &run.cfg.weaksup)?;
            let weak: Vec<Option<f64>> = view.distributions.iter().map(|d| Some(d.p_fake)).collect();
            let fitted = trifn::fit(&view.networks, Supervision { gold: &gold, weak: &weak }, run.cfg.trifn)?;
            log::info!(
                "objective {:.6} -> {:.6} in {} iterations",
                fitted.trace[0],
                fitted.trace.last().unwrap(),
                fitted.trace.len() - 1
            );
            if let Some(parent) = run.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut f = BufWriter::new(fs::File::create(&run.out)?);
            trifn::write_model(&mut f, &fitted.model)?;
            f.flush()?;
            run.finish_model("train-trifn")?;
        }
        Command::TrainDefend { corpus, mode } => {
            run.seed = run.cfg.coattend.seed;
            let c = run.corpus(&corpus)?;
            let (model, report) = train_on(&c, None, &run.cfg.coattend, mode)?;
            log::info!(
                "loss {:.4} -> {:.4}, best epoch {}",
                report.initial_loss,
                report.epoch_loss.last().copied().unwrap_or(report.initial_loss),
                report.best_epoch
            );
            if let Some(parent) = run.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            model.save(&run.out)?;
            run.finish_model("train-defend")?;
        }
        Command::Evaluate { corpus, cutoff, model } => {
            let c = run.corpus(&corpus)?;
            match model {
                Some(path) => {
                    run.inputs.push(path.clone());
                    let m = CoAttentionModel::load(&path)?;
                    let gold = c.gold_labels();
                    let items: Vec<usize> = (0..gold.len()).filter(|&j| gold[j].is_some()).collect();
                    let preds = items.iter().map(|&j| decide(m.predict(&c, j))).collect::<Vec<_>>();
                    let truth = items.iter().map(|&j| gold[j].unwrap()).collect::<Vec<_>>();
                    let metrics = evaluate_classification(&preds, &truth)?;
                    let mut text = metrics_csv(&[]);
                    text.push_str(&format!(
                        "defend_{},all,{},0,{},{},{},{}\n",
                        m.mode, m.config.seed, metrics.accuracy, metrics.precision, metrics.recall, metrics.f1
                    ));
                    run.write("metrics.csv", &text)?;
                    let mut outputs = vec!["metrics.csv"];
                    if let Some(records) = run.ground_truth(&corpus)? {
                        let s = explanation_scores(&m, &c, &records, &items, run.cfg.experiment.top_k);
                        run.write(
                            "explanation_scores.csv",
                            &format!(
                                "{EXPLANATION_HEADER}\n{},{},{},{},{},{}\n",
                                m.config.seed,
                                s.items,
                                s.comment_ndcg,
                                s.comment_ndcg_random,
                                s.sentence_map,
                                s.sentence_map_random
                            ),
                        )?;
                        outputs.push("explanation_scores.csv");
                    }
                    run.finish_dir("evaluate", &outputs)?;
                }
                None => {
                    let content = run.content(&c);
                    let ctx = CellContext {
                        corpus: &c,
                        content: &content,
                        lexicon: &run.lexicon,
                        weaksup: run.cfg.weaksup,
                        trifn: run.cfg.trifn,
                    };
                    let e = &run.cfg.experiment;
                    let mut rows: Vec<MetricsRow> = Vec::new();
                    for &method in &e.methods {
                        for &seed in &e.seeds {
                            rows.extend(cross_validate(&ctx, method, cutoff, seed, e.folds)?);
                        }
                    }
                    run.write("metrics.csv", &metrics_csv(&rows))?;
                    run.finish_dir("evaluate", &["metrics.csv"])?;
                }
            }
        }
        Command::Explain {
            model,
            corpus,
            news_id,
            top_k,
        } => {
            run.inputs.push(model.clone());
            let c = run.corpus(&corpus)?;
            let m = CoAttentionModel::load(&model)?;
            let k = top_k.unwrap_or(run.cfg.experiment.top_k);
            if k == 0 {
                bail!("--top-k must be >= 1");
            }
            let items: Vec<usize> = match &news_id {
                Some(id) => vec![c.news_position(id).with_context(|| format!("unknown news id `{id}`"))?],
                None => (0..c.news().len()).collect(),
            };
            let mut text = String::new();
            for j in items {
                let mut e = m.explain(&c, j);
                e.truncate(k);
                for (r, s) in e.sentences.iter().enumerate() {
                    let rec = ExplanationRecord {
                        news_id: &e.news_id,
                        p_fake: e.p_fake,
                        kind: "sentence",
                        rank: r + 1,
                        index: Some(s.index),
                        comment_id: None,
                        weight: s.weight,
                        text: &s.text,
                    };
                    text.push_str(&serde_json::to_string(&rec)?);
                    text.push('\n');
                }
                for (r, cm) in e.comments.iter().enumerate() {
                    let rec = ExplanationRecord {
                        news_id: &e.news_id,
                        p_fake: e.p_fake,
                        kind: "comment",
                        rank: r + 1,
                        index: None,
                        comment_id: Some(&cm.comment_id),
                        weight: cm.weight,
                        text: &cm.text,
                    };
                    text.push_str(&serde_json::to_string(&rec)?);
                    text.push('\n');
                }
            }
            run.write("explanations.ndjson", &text)?;
            run.finish_dir("explain", &["explanations.ndjson"])?;
        }
        Command::SweepEarly { corpus } => {
            let c = run.corpus(&corpus)?;
            let content = run.content(&c);
            let ctx = CellContext {
                corpus: &c,
                content: &content,
                lexicon: &run.lexicon,
                weaksup: run.cfg.weaksup,
                trifn: run.cfg.trifn,
            };
            let e = &run.cfg.experiment;
            let grid = e.cutoff_grid();
            let mut sweeps = Vec::new();
            for &method in &e.methods {
                let s = early_detection_sweep(&ctx, &grid, method, &e.seeds, e.folds)?;
                for &cut in &grid {
                    log::info!(
                        "{method} cutoff {}: mean accuracy {:.3}",
                        cut.map_or("all".to_string(), |h| h.to_string()),
                        s.mean_accuracy(cut).unwrap_or(f64::NAN)
                    );
                }
                sweeps.push(s);
            }
            let rows: Vec<MetricsRow> = sweeps.iter().flat_map(|s| s.rows.iter().cloned()).collect();
            run.write("metrics.csv", &metrics_csv(&rows))?;
            run.write("sweep.svg", &sweep_svg(&sweeps))?;
            run.finish_dir("sweep-early", &["metrics.csv", "sweep.svg"])?;
        }
        Command::AblateDefend { corpus } => {
            let c = run.corpus(&corpus)?;
            let truth = run.ground_truth(&corpus)?;
            let e = &run.cfg.experiment;
            let rows = ablation_study(
                &c,
                truth.as_deref(),
                &run.cfg.coattend,
                &Mode::ALL,
                &e.seeds,
                e.folds,
                e.top_k,
            )?;
            for mode in Mode::ALL {
                log::info!("{mode}: mean f1 {:.3}", mean_f1(&rows, mode).unwrap_or(f64::NAN));
            }
            run.write("metrics.csv", &ablation_csv(&rows))?;
            let mut outputs = vec!["metrics.csv"];
            if truth.is_some() {
                run.write("explanation_scores.csv", &explanation_csv(&rows))?;
                outputs.push("explanation_scores.csv");
            }
            run.finish_dir("ablate-defend", &outputs)?;
        }
    }
    Ok(())
}
