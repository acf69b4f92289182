use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use triage_core::adaptive::AdaptiveConfig;
use triage_core::agreement::{majority_reference, read_ratings, write_ratings, RatingMatrix, RatingRecord};
use triage_core::fixed::FixedConfig;
use triage_core::rater::{
    build_cases, write_replay_log, AdaptiveRater, ExternalConfig, ExternalRater, FixedRater, MockRater, Rater, RaterCase, RecordingRater,
    ReplayRater,
};
use triage_core::sim::{simulate, SimConfig, SimDataset};
use triage_core::study::{
    build_assignment, collect_run, intra_rater_consistency, run_adjudication, run_baseline_comparison, run_desk_study, run_irr, run_loo,
    run_validation, select_severe_overtriage, simulate_adjudicators, simulate_panel, AssignmentPlan, RaterRun, StudyConfig, StudyReport,
    AGENT_ID,
};
use triage_core::vitals::SeverityLevel;
use triage_review::{AccessConfig, ReviewService};

/// Exit status when a report fails its internal-consistency audit.
const AUDIT_FAILED: i32 = 2;

#[derive(Parser)]
#[command(name = "rpm-triage", version, about = "Vital-sign triage baselines and agreement studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Study directory written by `simulate`.
    #[arg(long, default_value = "study")]
    data: PathBuf,
    /// Study settings; defaults to <data>/study.toml when present.
    #[arg(long)]
    study: Option<PathBuf>,
    /// Overrides every seed in the study settings.
    #[arg(long)]
    seed: Option<u64>,
    /// Threshold table replacing the study's fixed rater settings
    #[arg(long)]
    fixed_config: Option<PathBuf>,
    /// Replaces the study's adaptive rater settings
    #[arg(long)]
    adaptive_config: Option<PathBuf>,
    /// Also write report.md, report.json and tables/ here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort, the assignment plan and a mock panel.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        study: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "study")]
        out: PathBuf,
    },
    /// Run one rater over every sample and save its verdicts.
    Triage {
        #[command(flatten)]
        common: Common,
        /// fixed | adaptive | mock | replay:<id>:<log> | external:<id>:<url>
        #[arg(long, default_value = "fixed")]
        rater: String,
        /// Verdict file to write.
        #[arg(long, default_value = "run.json")]
        verdicts: PathBuf,
        /// Keep every trial in a replay log.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Repeated-run self-agreement of one rater.
    Irr {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "mock")]
        rater: String,
        #[arg(long)]
        runs: Option<u32>,
        /// Number of samples; defaults to the study setting.
        #[arg(long)]
        items: Option<usize>,
    },
    /// Alert rates of the baselines and the mock agent.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "fixed,adaptive,mock")]
        raters: Vec<String>,
    },
    /// Accuracy of saved verdicts against the panel.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Panel ratings; defaults to <data>/panel.csv.
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Verdict files from `triage`.
        #[arg(long = "run", required = true)]
        runs: Vec<PathBuf>,
        /// Rater whose QWK interval and max-severity metrics are reported.
        #[arg(long)]
        primary: Option<String>,
    },
    /// Leave-one-out comparison of one rater with each panel member.
    Loo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long = "run")]
        run: PathBuf,
    },
    /// Classify the rater's severe overtriage cases against regrades.
    Adjudicate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ratings: Option<PathBuf>,
        #[arg(long = "run")]
        run: PathBuf,
        /// Regrade ratings file; simulated from the latent labels when absent.
        #[arg(long)]
        regrades: Option<PathBuf>,
    },
    /// Full desk-scale study from a simulated cohort.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Serve the blinded review queue.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Review UI bundle.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Grade log; defaults to <data>/grades.jsonl.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Token file; created under <data> when missing.
        #[arg(long)]
        access: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        study_id: String,
    },
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn study_config(study: Option<&Path>, data: Option<&Path>, seed: Option<u64>) -> Result<StudyConfig> {
    let implicit = data.map(|d| d.join("study.toml")).filter(|p| p.exists());
    let mut cfg = match study.map(Path::to_path_buf).or(implicit) {
        Some(p) => read_toml(&p)?,
        None => StudyConfig::default(),
    };
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    Ok(cfg)
}

struct Loaded {
    data: PathBuf,
    cfg: StudyConfig,
    ds: SimDataset,
    cases: Vec<RaterCase>,
}

impl Loaded {
    fn open(c: &Common) -> Result<Self> {
        let mut cfg = study_config(c.study.as_deref(), Some(&c.data), c.seed)?;
        if let Some(p) = &c.fixed_config {
            cfg.fixed = FixedConfig::load(p).with_context(|| format!("loading {}", p.display()))?;
        }
        if let Some(p) = &c.adaptive_config {
            cfg.adaptive = AdaptiveConfig::load(p).with_context(|| format!("loading {}", p.display()))?;
        }
        let ds = SimDataset::read_dir(&c.data).with_context(|| format!("reading study data from {}", c.data.display()))?;
        let cases = build_cases(&ds.samples, &ds.readings, &ds.context)?;
        Ok(Self { data: c.data.clone(), cfg, ds, cases })
    }

    fn latent(&self) -> BTreeMap<String, SeverityLevel> {
        self.ds.samples.iter().map(|s| (s.sample_id.clone(), s.latent)).collect()
    }

    fn rater(&self, spec: &str) -> Result<Box<dyn Rater>> {
        let parts: Vec<&str> = spec.splitn(3, ':').collect();
        Ok(match parts.as_slice() {
            ["fixed"] => Box::new(FixedRater::new(self.cfg.fixed.clone())),
            ["adaptive"] => Box::new(AdaptiveRater::new(self.cfg.adaptive.clone())),
            ["mock"] => Box::new(MockRater::new(AGENT_ID, self.cfg.agent_kernel, self.latent(), self.cfg.seed)),
            ["replay", id, path] => Box::new(ReplayRater::load(*id, path)?),
            ["external", id, url] => Box::new(ExternalRater::new(ExternalConfig::new(*id, *url))),
            _ => bail!("unknown rater {spec:?}; expected fixed, adaptive, mock, replay:<id>:<log> or external:<id>:<url>"),
        })
    }

    fn panel(&self, ratings: Option<&Path>) -> Result<Vec<RatingRecord>> {
        let path = ratings.map(Path::to_path_buf).unwrap_or_else(|| self.data.join("panel.csv"));
        read_ratings(&path).with_context(|| format!("reading {}", path.display()))
    }

    fn plan(&self) -> Result<AssignmentPlan> {
        let path = self.data.join("plan.json");
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Prints the report, writes it when asked and exits on a failed audit.
fn finish(report: &StudyReport, out: Option<&Path>) -> Result<()> {
    print!("{}", report.to_markdown());
    if let Some(dir) = out {
        report.write_dir(dir)?;
        eprintln!("wrote {}", dir.display());
    }
    let problems = report.audit();
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("audit: {p}");
        }
        std::process::exit(AUDIT_FAILED);
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn cmd_simulate(config: Option<PathBuf>, study: Option<PathBuf>, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut sim = match &config {
        Some(p) => SimConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        sim.seed = s;
    }
    let cfg = study_config(study.as_deref(), None, seed)?;
    let ds = simulate(&sim)?;
    ds.write_dir(&out)?;

    let ids: Vec<String> = ds.samples.iter().map(|s| s.sample_id.clone()).collect();
    let reviewers: Vec<String> = cfg.panel.reviewers.iter().map(|r| r.id.clone()).collect();
    let plan = build_assignment(&ids, &reviewers, &cfg.assignment)?;
    let latent = ds.samples.iter().map(|s| (s.sample_id.clone(), s.latent)).collect();
    let panel = simulate_panel(&plan, &latent, &cfg.panel)?;
    write_json(&out.join("plan.json"), &plan)?;
    write_ratings(std::fs::File::create(out.join("panel.csv"))?, &panel)?;
    std::fs::write(out.join("study.toml"), toml::to_string(&cfg)?)?;

    let chronic = ds.samples.iter().filter(|s| s.chronic_abnormal).count();
    println!(
        "{} patients, {} readings, {} samples ({chronic} chronic-abnormal), {} panel ratings -> {}",
        ds.cohort.len(),
        ds.readings.len(),
        ds.samples.len(),
        panel.len(),
        out.display()
    );
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, study, seed, out } => cmd_simulate(config, study, seed, out),
        Command::Triage { common, rater, verdicts, record } => {
            let l = Loaded::open(&common)?;
            let inner = l.rater(&rater)?;
            let recorder = RecordingRater::new(inner);
            let run = collect_run(&recorder, &l.cases);
            write_json(&verdicts, &run)?;
            if let Some(path) = record {
                write_replay_log(std::fs::File::create(&path)?, &recorder.records())?;
            }
            let mut counts = [0usize; 4];
            for v in run.verdicts.values() {
                counts[v.index()] += 1;
            }
            println!(
                "{}: {} cases, E {} / U {} / M {} / NI {}, {} failed -> {}",
                run.rater_id,
                run.n(),
                counts[3],
                counts[2],
                counts[1],
                counts[0],
                run.failures.len(),
                verdicts.display()
            );
            Ok(())
        }
        Command::Irr { common, rater, runs, items } => {
            let l = Loaded::open(&common)?;
            let r = l.rater(&rater)?;
            let mut irr_cfg = l.cfg.irr.clone();
            if let Some(n) = runs {
                irr_cfg.runs = n;
            }
            let n = items.unwrap_or(l.cfg.irr_items).min(l.cases.len());
            let section = run_irr(r.as_ref(), &l.cases[..n], &irr_cfg)?;
            finish(&StudyReport { seed: l.cfg.seed, irr: Some(section), ..StudyReport::default() }, common.out.as_deref())
        }
        Command::Compare { common, raters } => {
            let l = Loaded::open(&common)?;
            let boxed: Vec<Box<dyn Rater>> = raters.iter().map(|s| l.rater(s)).collect::<Result<_>>()?;
            let refs: Vec<&dyn Rater> = boxed.iter().map(|b| b.as_ref()).collect();
            let (comparison, _) = run_baseline_comparison(&refs, &l.cases);
            finish(&StudyReport { seed: l.cfg.seed, comparison: Some(comparison), ..StudyReport::default() }, common.out.as_deref())
        }
        Command::Validate { common, ratings, runs, primary } => {
            let l = Loaded::open(&common)?;
            let panel = l.panel(ratings.as_deref())?;
            let runs: Vec<RaterRun> = runs.iter().map(RaterRun::load).collect::<Result<_, _>>()?;
            let primary = primary.unwrap_or_else(|| runs[0].rater_id.clone());
            let matrix = RatingMatrix::from_records(&panel);
            let validation = run_validation(&matrix, &runs, &primary, l.cfg.resamples, l.cfg.seed)?;
            let plan = l.plan().ok();
            let intra = plan.map(|p| intra_rater_consistency(&panel, &p.anchors, p.presentations));
            finish(&StudyReport { seed: l.cfg.seed, validation: Some(validation), intra, ..StudyReport::default() }, common.out.as_deref())
        }
        Command::Loo { common, ratings, run } => {
            let l = Loaded::open(&common)?;
            let matrix = RatingMatrix::from_records(&l.panel(ratings.as_deref())?);
            let loo = run_loo(&matrix, &l.plan()?.assignments, &RaterRun::load(&run)?)?;
            finish(&StudyReport { seed: l.cfg.seed, loo: Some(loo), ..StudyReport::default() }, common.out.as_deref())
        }
        Command::Adjudicate { common, ratings, run, regrades } => {
            let l = Loaded::open(&common)?;
            let matrix = RatingMatrix::from_records(&l.panel(ratings.as_deref())?);
            let run = RaterRun::load(&run)?;
            let severe = select_severe_overtriage(&run.verdicts, &majority_reference(&matrix), l.cfg.min_gap);
            let (grades, columns) = match regrades {
                Some(p) => {
                    let m = RatingMatrix::from_records(&read_ratings(&p)?);
                    let cols = m.raters().to_vec();
                    (m, cols)
                }
                None => {
                    let m = simulate_adjudicators(&severe, &l.latent(), &l.cfg.adjudicators, &l.cfg.adjudicator_kernel, l.cfg.seed)?;
                    let mut cols = l.cfg.adjudicators.clone();
                    if cols.len() >= 2 {
                        cols.push("final".into());
                    }
                    (m, cols)
                }
            };
            let section = run_adjudication(&run.rater_id, severe, &grades, &columns, l.cfg.min_gap)?;
            finish(&StudyReport { seed: l.cfg.seed, adjudication: Some(section), ..StudyReport::default() }, common.out.as_deref())
        }
        Command::Report { common } => {
            let l = Loaded::open(&common)?;
            let study = run_desk_study(&l.ds, &l.cfg)?;
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir)?;
                for run in &study.runs {
                    write_json(&dir.join(format!("run_{}.json", run.rater_id)), run)?;
                }
            }
            finish(&study.report, common.out.as_deref())
        }
        Command::Serve { common, addr, static_dir, log, access, study_id } => {
            let l = Loaded::open(&common)?;
            let plan = l.plan()?;
            let access_path = access.unwrap_or_else(|| common.data.join("access.json"));
            let access = if access_path.exists() {
                serde_json::from_str(&std::fs::read_to_string(&access_path)?)?
            } else {
                let a = AccessConfig::generate(study_id, &plan);
                write_json(&access_path, &a)?;
                eprintln!("wrote reviewer tokens to {}", access_path.display());
                a
            };
            let log = log.unwrap_or_else(|| common.data.join("grades.jsonl"));
            let svc = ReviewService::open(
                plan,
                l.cases,
                access,
                &log,
                &[AGENT_ID, triage_core::fixed::RATER_ID, triage_core::adaptive::RATER_ID],
            )?;
            eprintln!("serving on http://{addr}");
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(triage_review::http::serve(Arc::new(svc), addr, static_dir))?;
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
