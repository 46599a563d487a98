//! Command-line orchestration.
//!
//! Every stage reads the previous stage's artifacts from disk, so stages can
//! be run and tested one at a time; `pipeline` runs them all in memory and
//! writes the same artifact set. Parameter precedence is built-in defaults,
//! then command-line flags, then the `--config` file.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::consistency::{apply_consistency, ConsistencyReport, ConsistencyThresholds};
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_methods, pairwise_tally, render_eval_table, DiscardPolicy, EvalReport, GroundTruth, MethodEval, Tally,
};
use crate::exec::Execution;
use crate::formats::{
    create, open, read_clusterings, read_interactions, read_report, write_clusterings, write_interactions,
    write_report, Provenance, WearerClustering,
};
use crate::ingest::{self, Dataset, ObsKey};
use crate::profile::{build_profiles, compute_traits, SocialProfile, SocialTraits};
use crate::reid::{AhcParams, Clustering, MeanShiftParams, Method, MethodSpec, Metric, SpectralParams};
use crate::render::{render_radar, render_table, RadarSpec};
use crate::segmentation::{segment, Interaction, SegmentationParams};
use crate::synth::{generate, SynthConfig};

pub const CLUSTERING_FILE: &str = "clustering.jsonl";
pub const CONSISTENCY_FILE: &str = "consistency.json";
pub const INTERACTIONS_FILE: &str = "interactions.jsonl";
pub const TRAITS_FILE: &str = "traits.json";
pub const TRAITS_TABLE_FILE: &str = "traits.txt";
pub const PROFILES_FILE: &str = "profiles.json";
pub const RADAR_OVERLAY_FILE: &str = "radar_overlay.svg";
pub const EVAL_FILE: &str = "eval.json";
pub const EVAL_TABLE_FILE: &str = "eval.txt";

/// Every parameter of a run. Serialized into each artifact's provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub observations: Option<PathBuf>,
    pub coverage: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Not part of the fingerprint.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub method: Method,
    pub ahc: AhcParams,
    pub meanshift: MeanShiftParams,
    pub spectral: SpectralParams,
    pub consistency: ConsistencyThresholds,
    pub segmentation: SegmentationParams,
    pub discard_policy: DiscardPolicy,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            observations: None,
            coverage: None,
            truth: None,
            out: None,
            method: Method::Ahc,
            ahc: AhcParams::default(),
            meanshift: MeanShiftParams::default(),
            spectral: SpectralParams::new(20),
            consistency: ConsistencyThresholds::default(),
            segmentation: SegmentationParams::default(),
            discard_policy: DiscardPolicy::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.ahc.validate()?;
        self.consistency.validate()?;
        self.segmentation.validate()
    }

    pub fn provenance(&self) -> Result<Provenance> {
        let mut c = self.clone();
        c.out = None;
        Provenance::of(&c)
    }

    pub fn method_spec(&self, method: Method) -> MethodSpec {
        match method {
            Method::Ahc => MethodSpec::Ahc(self.ahc),
            Method::MeanShift => MethodSpec::MeanShift(self.meanshift),
            Method::Spectral => MethodSpec::Spectral(SpectralParams {
                seed: self.seed,
                ..self.spectral
            }),
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::Config("an output location (--out) is required".into()))
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let obs = self
            .observations
            .as_deref()
            .ok_or_else(|| Error::Config("an observation file (--obs) is required".into()))?;
        let cov = self.coverage.as_deref().map(open).transpose()?;
        ingest::load(open(obs)?, cov)
    }

    pub fn load_truth(&self) -> Result<GroundTruth> {
        let path = self
            .truth
            .as_deref()
            .ok_or_else(|| Error::Config("a ground-truth file (--truth) is required".into()))?;
        GroundTruth::parse(open(path)?)
    }

    /// One line per parameter group, for the startup banner.
    pub fn describe(&self) -> String {
        let a = &self.ahc;
        let c = &self.consistency;
        let s = &self.segmentation;
        format!(
            "method={} metric={} cut_threshold={} normalize={}\n\
             robust_mean={} reject_mean={} member_min={}\n\
             min_event_min={} max_gap_min={} seed={}",
            self.method,
            a.metric,
            a.cut_threshold,
            a.normalize_descriptors,
            c.robust_mean,
            c.reject_mean,
            c.member_min,
            s.min_event_minutes,
            s.max_gap_minutes,
            self.seed
        )
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "egosocial",
    version,
    about = "Social-interaction analytics for egocentric photostreams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check inputs; print per-wearer day counts.
    Validate(StageArgs),
    /// Cluster identities and apply the consistency filter.
    Cluster(StageArgs),
    /// Turn a clustering into interactions.
    Segment {
        #[command(flatten)]
        args: StageArgs,
        /// Clustering file from `cluster`.
        #[arg(long)]
        clustering: PathBuf,
    },
    /// Compute social traits and profiles from interactions.
    Profile {
        #[command(flatten)]
        args: StageArgs,
        /// Interactions file from `segment`.
        #[arg(long)]
        interactions: PathBuf,
    },
    /// Render radar charts from a profiles report.
    Render {
        /// Profiles report from `profile`.
        #[arg(long)]
        profiles: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score clustering methods against ground truth.
    Eval {
        #[command(flatten)]
        args: StageArgs,
        /// Methods to compare; defaults to all three.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
    },
    /// Generate a synthetic photostream from a config file.
    Synth {
        /// Synthetic dataset config (TOML or JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage end to end.
    Pipeline(StageArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct StageArgs {
    #[arg(long)]
    pub obs: Option<PathBuf>,
    #[arg(long)]
    pub coverage: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub cut_threshold: Option<f64>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub normalize: Option<bool>,
    #[arg(long)]
    pub robust_mean: Option<f64>,
    #[arg(long)]
    pub reject_mean: Option<f64>,
    #[arg(long)]
    pub member_min: Option<f64>,
    #[arg(long)]
    pub min_event_min: Option<f64>,
    #[arg(long)]
    pub max_gap_min: Option<f64>,
    #[arg(long)]
    pub method: Option<String>,
    /// Mean-shift bandwidth; median pairwise distance when omitted.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Spectral cluster count.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub affinity_scale: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Structured config file (TOML or JSON); its values override flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

fn read_structured(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

impl StageArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        macro_rules! set {
            ($flag:expr, $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        c.observations = self.obs.clone();
        c.coverage = self.coverage.clone();
        c.truth = self.truth.clone();
        c.out = self.out.clone();
        set!(self.cut_threshold, c.ahc.cut_threshold);
        if let Some(m) = &self.metric {
            c.ahc.metric = m.parse::<Metric>()?;
        }
        if let Some(n) = self.normalize {
            c.ahc.normalize_descriptors = n;
            c.meanshift.normalize_descriptors = n;
            c.spectral.normalize_descriptors = n;
        }
        set!(self.robust_mean, c.consistency.robust_mean);
        set!(self.reject_mean, c.consistency.reject_mean);
        set!(self.member_min, c.consistency.member_min);
        set!(self.min_event_min, c.segmentation.min_event_minutes);
        set!(self.max_gap_min, c.segmentation.max_gap_minutes);
        if let Some(m) = &self.method {
            c.method = m.parse::<Method>()?;
        }
        if self.bandwidth.is_some() {
            c.meanshift.bandwidth = self.bandwidth;
        }
        set!(self.k, c.spectral.k);
        set!(self.affinity_scale, c.spectral.affinity_scale);
        set!(self.seed, c.seed);

        if let Some(path) = &self.config {
            let mut base = serde_json::to_value(&c)?;
            merge(&mut base, read_structured(path)?);
            c = serde_json::from_value(base).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Per-wearer results of clustering plus consistency filtering.
pub struct ClusterStage {
    pub dataset: Dataset,
    pub wearers: Vec<(String, Dataset, Clustering, ConsistencyReport)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WearerConsistency {
    pub wearer_id: String,
    pub raw_clusters: usize,
    pub report: ConsistencyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyBody {
    pub wearers: Vec<WearerConsistency>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitsBody {
    pub traits: Vec<SocialTraits>,
    pub sub_event_runs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilesBody {
    pub profiles: Vec<SocialProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBody {
    pub methods: Vec<MethodEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEvalBody {
    pub method: Method,
    pub report: EvalReport,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Summary printed by `validate`.
pub fn validate_summary(dataset: &Dataset) -> String {
    let mut s = String::new();
    for (wearer, days) in dataset.day_counts() {
        let total: usize = days.values().sum();
        s.push_str(&format!("{wearer}: {} day(s), {total} observation(s)\n", days.len()));
        for (day, n) in days {
            let synth = dataset.coverage_for(&wearer, day).is_some_and(|c| c.synthesized);
            s.push_str(&format!(
                "  {day}: {n}{}\n",
                if synth { " (coverage synthesized)" } else { "" }
            ));
        }
    }
    s
}

pub fn cluster_stage(cfg: &RunConfig, dataset: Dataset, exec: Execution) -> Result<ClusterStage> {
    let spec = cfg.method_spec(cfg.method);
    let mut wearers = Vec::new();
    for w in dataset.wearers() {
        let slice = dataset.slice(&w, None)?;
        let raw = spec
            .run(slice.observations(), exec)
            .map_err(|e| e.in_stage("cluster"))?;
        let (filtered, report) = apply_consistency(&raw, slice.observations(), &cfg.consistency, exec)
            .map_err(|e| e.in_stage("consistency"))?;
        wearers.push((w, slice, filtered, report));
    }
    Ok(ClusterStage { dataset, wearers })
}

fn write_cluster_artifacts(out: &Path, prov: &Provenance, stage: &ClusterStage) -> Result<()> {
    let parts: Vec<WearerClustering<'_>> = stage
        .wearers
        .iter()
        .map(|(w, slice, c, _)| WearerClustering {
            wearer_id: w,
            clustering: c,
            observations: slice.observations(),
        })
        .collect();
    let path = out.join(CLUSTERING_FILE);
    write_clusterings(create(&path)?, prov, &parts).map_err(io_err(&path))?;
    let body = ConsistencyBody {
        wearers: stage
            .wearers
            .iter()
            .map(|(w, _, _, r)| WearerConsistency {
                wearer_id: w.clone(),
                raw_clusters: r.clusters.len(),
                report: r.clone(),
            })
            .collect(),
    };
    write_report(&out.join(CONSISTENCY_FILE), prov, &body)
}

fn segment_all(
    cfg: &RunConfig,
    dataset: &Dataset,
    clusterings: &BTreeMap<String, Clustering>,
    exec: Execution,
) -> Result<(Vec<Interaction>, usize)> {
    let mut all = Vec::new();
    let mut short = 0;
    for (w, c) in clusterings {
        let slice = dataset.slice(w, None)?;
        let s = segment(c, slice.observations(), &cfg.segmentation, exec).map_err(|e| e.in_stage("segment"))?;
        all.extend(s.interactions);
        short += s.sub_event_runs;
    }
    Ok((all, short))
}

fn write_interactions_file(out: &Path, prov: &Provenance, interactions: &[Interaction]) -> Result<()> {
    let path = out.join(INTERACTIONS_FILE);
    write_interactions(create(&path)?, prov, interactions).map_err(io_err(&path))
}

fn traits_for(dataset: &Dataset, interactions: &[Interaction]) -> Result<Vec<SocialTraits>> {
    dataset
        .wearers()
        .iter()
        .map(|w| compute_traits(interactions, dataset.coverage().values(), w).map_err(|e| e.in_stage("profile")))
        .collect()
}

fn write_profile_artifacts(
    out: &Path,
    prov: &Provenance,
    traits: &[SocialTraits],
    sub_event_runs: Option<usize>,
) -> Result<Vec<SocialProfile>> {
    write_report(
        &out.join(TRAITS_FILE),
        prov,
        &TraitsBody {
            traits: traits.to_vec(),
            sub_event_runs,
        },
    )?;
    let path = out.join(TRAITS_TABLE_FILE);
    let mut w = create(&path)?;
    write!(w, "# fingerprint: {}\n{}", prov.fingerprint, render_table(traits)).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;

    if traits.is_empty() {
        return Ok(Vec::new());
    }
    let profiles = build_profiles(traits, &prov.fingerprint).map_err(|e| e.in_stage("profile"))?;
    write_report(
        &out.join(PROFILES_FILE),
        prov,
        &ProfilesBody {
            profiles: profiles.clone(),
        },
    )?;
    Ok(profiles)
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes the overlay chart and one chart per wearer; returns written paths.
pub fn write_radars(out: &Path, profiles: &[SocialProfile], fingerprint: &str) -> Result<Vec<PathBuf>> {
    if profiles.is_empty() {
        return Err(Error::EmptyChart.in_stage("render"));
    }
    let mut written = Vec::new();
    let mut emit = |name: String, spec: RadarSpec| -> Result<()> {
        let svg = render_radar(&spec).map_err(|e| e.in_stage("render"))?;
        let path = out.join(name);
        let mut w = create(&path)?;
        write!(w, "<!-- fingerprint: {fingerprint} -->\n{svg}").map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
        written.push(path);
        Ok(())
    };
    emit(RADAR_OVERLAY_FILE.to_string(), RadarSpec::from_profiles(profiles, true))?;
    for (i, p) in profiles.iter().enumerate() {
        // each single-wearer chart keeps its cohort-normalized values and palette slot
        let mut spec = RadarSpec::from_profiles(profiles, true);
        spec.series = vec![spec.series[i].clone()];
        emit(format!("radar_{i:02}_{}.svg", file_stem(&p.traits.wearer_id)), spec)?;
    }
    Ok(written)
}

fn print_banner(cfg: &RunConfig, prov: &Provenance) {
    eprintln!(
        "egosocial {} | config {}",
        env!("CARGO_PKG_VERSION"),
        &prov.fingerprint[..16]
    );
    for line in cfg.describe().lines() {
        eprintln!("  {line}");
    }
}

pub fn cmd_validate(args: &StageArgs) -> Result<String> {
    let cfg = args.resolve()?;
    let dataset = cfg.load_dataset()?;
    Ok(validate_summary(&dataset))
}

pub fn cmd_cluster(args: &StageArgs, exec: Execution) -> Result<()> {
    let cfg = args.resolve()?;
    let prov = cfg.provenance()?;
    print_banner(&cfg, &prov);
    let out = cfg.out_dir()?;
    let dataset = cfg.load_dataset().map_err(|e| e.in_stage("ingest"))?;
    let stage = cluster_stage(&cfg, dataset, exec)?;
    write_cluster_artifacts(out, &prov, &stage)
}

pub fn cmd_segment(args: &StageArgs, clustering: &Path, exec: Execution) -> Result<()> {
    let cfg = args.resolve()?;
    let prov = cfg.provenance()?;
    print_banner(&cfg, &prov);
    let out = cfg.out_dir()?;
    let dataset = cfg.load_dataset().map_err(|e| e.in_stage("ingest"))?;
    let clusterings = read_clusterings(open(clustering)?, &dataset)?;
    let (interactions, _) = segment_all(&cfg, &dataset, &clusterings, exec)?;
    write_interactions_file(out, &prov, &interactions)
}

pub fn cmd_profile(args: &StageArgs, interactions: &Path) -> Result<()> {
    let cfg = args.resolve()?;
    let prov = cfg.provenance()?;
    print_banner(&cfg, &prov);
    let out = cfg.out_dir()?;
    let (_, xs) = read_interactions(open(interactions)?)?;
    // coverage only needs the manifest, but synthesized days need observations
    let dataset = match (&cfg.observations, &cfg.coverage) {
        (Some(_), _) => cfg.load_dataset()?,
        (None, Some(c)) => Dataset::new(Vec::new(), ingest::parse_coverage(open(c)?)?)?,
        (None, None) => return Err(Error::Config("profile needs --coverage or --obs".into())),
    };
    let traits = traits_for(&dataset, &xs)?;
    write_profile_artifacts(out, &prov, &traits, None)?;
    Ok(())
}

pub fn cmd_render(profiles: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let report = read_report::<ProfilesBody>(profiles)?;
    write_radars(out, &report.body.profiles, &report.provenance.fingerprint)
}

pub fn cmd_eval(args: &StageArgs, methods: &[String], exec: Execution) -> Result<String> {
    let cfg = args.resolve()?;
    let prov = cfg.provenance()?;
    print_banner(&cfg, &prov);
    let dataset = cfg.load_dataset().map_err(|e| e.in_stage("ingest"))?;
    let truth = cfg.load_truth()?;
    let methods: Vec<Method> = if methods.is_empty() {
        vec![Method::Ahc, Method::MeanShift, Method::Spectral]
    } else {
        methods.iter().map(|m| m.parse()).collect::<Result<_>>()?
    };
    let specs: Vec<MethodSpec> = methods.iter().map(|&m| cfg.method_spec(m)).collect();
    let results = evaluate_methods(&dataset, &truth, &specs, &cfg.consistency, cfg.discard_policy, exec)
        .map_err(|e| e.in_stage("eval"))?;
    let table = render_eval_table(&results);
    if let Some(out) = &cfg.out {
        write_report(&out.join(EVAL_FILE), &prov, &EvalBody { methods: results })?;
        let path = out.join(EVAL_TABLE_FILE);
        let mut w = create(&path)?;
        write!(w, "# fingerprint: {}\n{table}", prov.fingerprint).map_err(io_err(&path))?;
        w.flush().map_err(io_err(&path))?;
    }
    Ok(table)
}

pub const SYNTH_OBSERVATIONS: &str = "observations.jsonl";
pub const SYNTH_COVERAGE: &str = "coverage.jsonl";
pub const SYNTH_TRUTH: &str = "truth.jsonl";
pub const SYNTH_SCHEDULE: &str = "schedule.jsonl";

pub fn cmd_synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg: SynthConfig = match config {
        Some(p) => {
            serde_json::from_value(read_structured(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let synth = generate(&cfg)?;
    write_synth(out, &synth)
}

pub fn write_synth(out: &Path, synth: &crate::synth::SynthDataset) -> Result<()> {
    let path = out.join(SYNTH_OBSERVATIONS);
    let mut w = create(&path)?;
    ingest::write_observations(&mut w, synth.dataset.observations()).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;

    let path = out.join(SYNTH_COVERAGE);
    let mut w = create(&path)?;
    ingest::write_coverage(&mut w, synth.dataset.coverage().values(), true).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;

    let path = out.join(SYNTH_TRUTH);
    let mut w = create(&path)?;
    synth.truth.write(&mut w).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;

    let path = out.join(SYNTH_SCHEDULE);
    let mut w = create(&path)?;
    for s in &synth.schedule_truth {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n").map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))
}

/// What `pipeline` produced, for callers that want to inspect results.
pub struct PipelineOutput {
    pub traits: Vec<SocialTraits>,
    pub profiles: Vec<SocialProfile>,
    pub interactions: Vec<Interaction>,
    pub eval: Option<EvalReport>,
}

pub fn run_pipeline(cfg: &RunConfig, exec: Execution) -> Result<PipelineOutput> {
    cfg.validate()?;
    let prov = cfg.provenance()?;
    let out = cfg.out_dir()?;
    let dataset = cfg.load_dataset().map_err(|e| e.in_stage("ingest"))?;
    let stage = cluster_stage(cfg, dataset, exec)?;
    write_cluster_artifacts(out, &prov, &stage)?;

    let clusterings: BTreeMap<String, Clustering> = stage
        .wearers
        .iter()
        .map(|(w, _, c, _)| (w.clone(), c.clone()))
        .collect();
    let (interactions, short) = segment_all(cfg, &stage.dataset, &clusterings, exec)?;
    write_interactions_file(out, &prov, &interactions)?;

    let traits = traits_for(&stage.dataset, &interactions)?;
    let profiles = write_profile_artifacts(out, &prov, &traits, Some(short))?;
    if !profiles.is_empty() {
        write_radars(out, &profiles, &prov.fingerprint)?;
    }

    let eval = match &cfg.truth {
        Some(_) => {
            let truth = cfg.load_truth()?;
            let mut tally = Tally::default();
            for (_, slice, c, _) in &stage.wearers {
                let keys: Vec<ObsKey> = slice.observations().iter().map(|o| o.key()).collect();
                tally.add(&pairwise_tally(c, &keys, &truth, cfg.discard_policy).map_err(|e| e.in_stage("eval"))?);
            }
            let report = tally.report();
            write_report(
                &out.join(EVAL_FILE),
                &prov,
                &PipelineEvalBody {
                    method: cfg.method,
                    report,
                },
            )?;
            Some(report)
        }
        None => None,
    };

    Ok(PipelineOutput {
        traits,
        profiles,
        interactions,
        eval,
    })
}

pub fn cmd_pipeline(args: &StageArgs, exec: Execution) -> Result<PipelineOutput> {
    let cfg = args.resolve()?;
    let prov = cfg.provenance()?;
    print_banner(&cfg, &prov);
    run_pipeline(&cfg, exec)
}

/// Runs a parsed command line; returns text for stdout.
pub fn run(cli: Cli) -> Result<String> {
    let exec = Execution::Parallel;
    match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Cluster(a) => cmd_cluster(&a, exec).map(|_| String::new()),
        Command::Segment { args, clustering } => cmd_segment(&args, &clustering, exec).map(|_| String::new()),
        Command::Profile { args, interactions } => cmd_profile(&args, &interactions).map(|_| String::new()),
        Command::Render { profiles, out } => {
            cmd_render(&profiles, &out).map(|paths| paths.iter().map(|p| format!("{}\n", p.display())).collect())
        }
        Command::Eval { args, methods } => cmd_eval(&args, &methods, exec),
        Command::Synth { config, seed, out } => cmd_synth(config.as_deref(), seed, &out).map(|_| String::new()),
        Command::Pipeline(a) => cmd_pipeline(&a, exec).map(|o| render_table(&o.traits)),
    }
}
