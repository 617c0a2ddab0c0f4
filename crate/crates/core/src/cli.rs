//! `nsdvpr` command line: `synth | match | eval | sweep | viz`.
//!
//! Metric flags (`--seq-len-m`, `--tolerance-m`) are converted to frames with
//! `--spacing-m` here; the library itself only deals in frames. Every
//! subcommand writes a `key = value` run manifest next to its output.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::descriptor::normalize_batch;
use crate::error::{Error, Result};
use crate::eval::{
    associate_ground_truth, meters_to_frames, pca_project, score_matches, sweep_sequence_length,
    CoordinateKind, GroundTruth,
};
use crate::io::{
    self, read_descriptor_file, read_ground_truth, read_matches, read_segments, read_traverse,
};
use crate::pipeline::{self, effective_warmup, MatchConfig, Mode, Normalization};
use crate::seqsearch::SearchParams;
use crate::synth::{generate, SynthConfig};

#[derive(Debug, Parser)]
#[command(
    name = "nsdvpr",
    version,
    about = "Sequence-based place recognition over normalized descriptor sets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic reference/query pair.
    Synth(SynthArgs),
    /// Match a query descriptor file against a reference descriptor file.
    Match(MatchArgs),
    /// Score a match file against ground truth as a precision-recall curve.
    Eval(EvalArgs),
    /// Max-F1 as a function of sequence length.
    Sweep(SweepArgs),
    /// 2-D principal-component projection of a descriptor file.
    Viz(VizArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "raw")]
    Raw,
    #[value(name = "nsd")]
    Nsd,
    #[value(name = "nsd_cr")]
    NsdCr,
    #[value(name = "nsd_segmented")]
    NsdSegmented,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Raw => Mode::Raw,
            ModeArg::Nsd => Mode::Nsd,
            ModeArg::NsdCr => Mode::NsdCr,
            ModeArg::NsdSegmented => Mode::NsdSegmented,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Batch,
    Online,
}

impl From<NormalizationArg> for Normalization {
    fn from(n: NormalizationArg) -> Normalization {
        match n {
            NormalizationArg::Batch => Normalization::Batch,
            NormalizationArg::Online => Normalization::Online,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoordsArg {
    #[value(name = "planar_m")]
    PlanarM,
    #[value(name = "wgs84")]
    Wgs84,
}

impl From<CoordsArg> for CoordinateKind {
    fn from(c: CoordsArg) -> CoordinateKind {
        match c {
            CoordsArg::PlanarM => CoordinateKind::PlanarM,
            CoordsArg::Wgs84 => CoordinateKind::Wgs84,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub places: usize,
    /// Region descriptor length; whole descriptors are twice this.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub place_sigma: f64,
    #[arg(long, default_value_t = 5)]
    pub categories: usize,
    #[arg(long, default_value_t = 2.0)]
    pub category_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale_max: f64,
    #[arg(long, default_value_t = 0.0)]
    pub offset_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Query drives the route backwards and sees left/right regions swapped.
    #[arg(long)]
    pub reverse: bool,
    #[arg(long, default_value_t = 2.0)]
    pub spacing_m: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Sequence length in meters.
    #[arg(long, default_value_t = 80.0)]
    pub seq_len_m: f64,
    /// Distance between consecutive frames in meters.
    #[arg(long, default_value_t = 2.0)]
    pub spacing_m: f64,
    #[arg(long, default_value_t = 11)]
    pub slope_count: usize,
    /// Half-width of the slope fan around the diagonal, radians.
    #[arg(long, default_value_t = 0.2)]
    pub angle_halfwidth: f64,
    /// Uniqueness exclusion window in frames.
    #[arg(long, default_value_t = 10)]
    pub uniqueness_window: usize,
}

impl SearchArgs {
    fn check_spacing(&self) -> Result<()> {
        if !(self.spacing_m > 0.0) {
            return Err(Error::invalid(format!(
                "--spacing-m must be positive, got {}",
                self.spacing_m
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SearchParams> {
        self.check_spacing()?;
        let p = SearchParams {
            seq_len: meters_to_frames(self.seq_len_m, self.spacing_m),
            slope_count: self.slope_count,
            angle_halfwidth: self.angle_halfwidth,
            uniqueness_window: self.uniqueness_window,
        };
        p.validate()?;
        Ok(p)
    }

    fn manifest(&self, p: &SearchParams, out: &mut Vec<(String, String)>) {
        push(out, "seq_len_m", self.seq_len_m);
        push(out, "seq_len_frames", p.seq_len);
        push(out, "spacing_m", self.spacing_m);
        push(out, "slope_count", p.slope_count);
        push(out, "angle_halfwidth", p.angle_halfwidth);
        push(out, "uniqueness_window", p.uniqueness_window);
    }
}

#[derive(Debug, Clone, Args)]
pub struct MatcherArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Nsd)]
    pub mode: ModeArg,
    /// Query-side normalization; the reference is always normalized as a batch.
    #[arg(long, value_enum, default_value_t = NormalizationArg::Batch)]
    pub normalization: NormalizationArg,
    /// CSV `side,start,end` segments, required by nsd_segmented.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// The query traverses the route in the opposite direction.
    #[arg(long)]
    pub reverse_reference: bool,
    #[command(flatten)]
    pub search: SearchArgs,
}

impl MatcherArgs {
    fn config(&self) -> Result<MatchConfig> {
        let config = MatchConfig {
            mode: self.mode.into(),
            normalization: self.normalization.into(),
            search: self.search.params()?,
            reverse_reference: self.reverse_reference,
            segments: self.segments.as_ref().map(read_segments).transpose()?,
        };
        config.validate()?;
        Ok(config)
    }

    fn manifest(&self, c: &MatchConfig, out: &mut Vec<(String, String)>) {
        push(out, "reference", self.reference.display());
        push(out, "query", self.query.display());
        push(out, "mode", c.mode);
        push(out, "normalization", c.normalization);
        push(
            out,
            "segments",
            self.segments
                .as_ref()
                .map_or("none".to_string(), |p| p.display().to_string()),
        );
        push(out, "reverse_reference", c.reverse_reference);
        self.search.manifest(&c.search, out);
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub matcher: MatcherArgs,
    /// Output CSV `query_index,best_reference,seq_cost,uniqueness`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TruthArgs {
    /// Ground-truth CSV `query_index,reference_index`.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Build ground truth from traverse positions instead of --gt.
    #[arg(long, requires = "reference_traverse", conflicts_with = "gt")]
    pub query_traverse: Option<PathBuf>,
    #[arg(long, requires = "query_traverse")]
    pub reference_traverse: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CoordsArg::PlanarM)]
    pub coords: CoordsArg,
    /// A match within this distance of the ground truth is correct.
    #[arg(long, default_value_t = 40.0)]
    pub tolerance_m: f64,
    /// Leading queries excluded from scoring.
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
}

impl TruthArgs {
    /// `reference_count` overrides the size inferred from a `--gt` file.
    fn load(&self, reference_count: Option<usize>) -> Result<GroundTruth> {
        match (&self.gt, &self.query_traverse, &self.reference_traverse) {
            (Some(p), _, _) => read_ground_truth(p, reference_count),
            (None, Some(q), Some(r)) => {
                let kind = self.coords.into();
                associate_ground_truth(
                    &read_traverse(q, kind)?,
                    &read_traverse(r, kind)?,
                    self.tolerance_m,
                )
            }
            _ => Err(Error::invalid(
                "ground truth needs --gt or both --query-traverse and --reference-traverse",
            )),
        }
    }

    fn manifest(&self, within: usize, out: &mut Vec<(String, String)>) {
        match (&self.gt, &self.query_traverse, &self.reference_traverse) {
            (Some(p), _, _) => push(out, "gt", p.display()),
            (None, Some(q), Some(r)) => {
                push(out, "query_traverse", q.display());
                push(out, "reference_traverse", r.display());
                push(out, "coords", format!("{:?}", self.coords).to_lowercase());
            }
            _ => {}
        }
        push(out, "tolerance_m", self.tolerance_m);
        push(out, "tolerance_frames", within);
        push(out, "warmup", self.warmup);
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Match CSV from `nsdvpr match`.
    #[arg(long)]
    pub matches: PathBuf,
    #[command(flatten)]
    pub truth: TruthArgs,
    #[arg(long, default_value_t = 2.0)]
    pub spacing_m: f64,
    /// Sequence length used for matching; queries before it are not scored.
    #[arg(long, default_value_t = 80.0)]
    pub seq_len_m: f64,
    /// Output CSV `threshold,precision,recall,f1`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub matcher: MatcherArgs,
    #[command(flatten)]
    pub truth: TruthArgs,
    /// Comma-separated sequence lengths in meters.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lengths_m: Vec<f64>,
    /// Output CSV `seq_len_m,seq_len_frames,max_f1`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output CSV `index,pc1,pc2` for the descriptors as stored.
    #[arg(long)]
    pub out: PathBuf,
    /// Also project the batch-normalized descriptors to this CSV.
    #[arg(long)]
    pub normalized_out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
}

fn push(out: &mut Vec<(String, String)>, key: &str, value: impl ToString) {
    out.push((key.to_string(), value.to_string()));
}

/// `<out>` with its extension replaced by `manifest.txt`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.txt")
}

fn within_frames(tolerance_m: f64, spacing_m: f64) -> Result<usize> {
    if !(spacing_m > 0.0) {
        return Err(Error::invalid(format!(
            "--spacing-m must be positive, got {spacing_m}"
        )));
    }
    if !(tolerance_m >= 0.0) {
        return Err(Error::invalid(format!(
            "--tolerance-m must be non-negative, got {tolerance_m}"
        )));
    }
    Ok(meters_to_frames(tolerance_m, spacing_m))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Match(a) => cmd_match(&a),
        Command::Eval(a) => cmd_eval(&a).map(|summary| println!("{summary}")),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Viz(a) => cmd_viz(&a),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        n_places: a.places,
        dim: a.dim,
        seed: a.seed,
        place_signal_sigma: a.place_sigma,
        category_count: a.categories,
        category_sigma: a.category_sigma,
        condition_scale_range: (a.scale_min, a.scale_max),
        condition_offset_sigma: a.offset_sigma,
        noise_sigma: a.noise_sigma,
        reverse: a.reverse,
        spacing_m: a.spacing_m,
    };
    let world = generate(&config)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let p = |name: &str| a.out.join(name);
    io::write_descriptors(p("reference.bin"), &world.reference.whole)?;
    io::write_composites(p("reference_cr.bin"), &world.reference.composite)?;
    io::write_traverse(p("reference_traverse.csv"), &world.reference.traverse)?;
    io::write_descriptors(p("query.bin"), &world.query.whole)?;
    io::write_composites(p("query_cr.bin"), &world.query.composite)?;
    io::write_traverse(p("query_traverse.csv"), &world.query.traverse)?;
    io::write_ground_truth(p("ground_truth.csv"), &world.ground_truth)?;

    let mut m = Vec::new();
    push(&mut m, "command", "synth");
    push(&mut m, "places", a.places);
    push(&mut m, "dim", a.dim);
    push(&mut m, "seed", a.seed);
    push(&mut m, "place_sigma", a.place_sigma);
    push(&mut m, "categories", a.categories);
    push(&mut m, "category_sigma", a.category_sigma);
    push(&mut m, "scale_min", a.scale_min);
    push(&mut m, "scale_max", a.scale_max);
    push(&mut m, "offset_sigma", a.offset_sigma);
    push(&mut m, "noise_sigma", a.noise_sigma);
    push(&mut m, "reverse", a.reverse);
    push(&mut m, "spacing_m", a.spacing_m);
    io::write_manifest(p("manifest.txt"), &m)
}

pub fn cmd_match(a: &MatchArgs) -> Result<()> {
    let config = a.matcher.config()?;
    let reference = read_descriptor_file(&a.matcher.reference)?;
    let query = read_descriptor_file(&a.matcher.query)?;
    let results = pipeline::run_matching(&query, &reference, &config)?;
    io::write_matches(&a.out, &results)?;

    let mut m = Vec::new();
    push(&mut m, "command", "match");
    a.matcher.manifest(&config, &mut m);
    push(&mut m, "out", a.out.display());
    io::write_manifest(manifest_path(&a.out), &m)
}

/// Writes the PR curve and returns the one-line summary.
pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    let within = within_frames(a.truth.tolerance_m, a.spacing_m)?;
    let seq_len = meters_to_frames(a.seq_len_m, a.spacing_m);
    let warmup = effective_warmup(a.truth.warmup, seq_len);
    let gt = a.truth.load(None)?;
    let results = read_matches(&a.matches)?;
    let curve = score_matches(&results, &gt, within, warmup)?;
    io::write_pr_curve(&a.out, &curve)?;

    let mut m = Vec::new();
    push(&mut m, "command", "eval");
    push(&mut m, "matches", a.matches.display());
    a.truth.manifest(within, &mut m);
    push(&mut m, "spacing_m", a.spacing_m);
    push(&mut m, "seq_len_m", a.seq_len_m);
    push(&mut m, "effective_warmup", warmup);
    push(&mut m, "out", a.out.display());
    push(&mut m, "max_f1", curve.max_f1);
    io::write_manifest(manifest_path(&a.out), &m)?;
    Ok(format!(
        "max_f1={} scorable={} points={}",
        curve.max_f1,
        curve.scorable,
        curve.points.len()
    ))
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let config = a.matcher.config()?;
    let spacing = a.matcher.search.spacing_m;
    let within = within_frames(a.truth.tolerance_m, spacing)?;
    if let Some(bad) = a.lengths_m.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::invalid(format!(
            "sequence lengths must be positive, got {bad}"
        )));
    }
    let frames: Vec<usize> = a
        .lengths_m
        .iter()
        .map(|&l| meters_to_frames(l, spacing))
        .collect();
    let reference = read_descriptor_file(&a.matcher.reference)?;
    let query = read_descriptor_file(&a.matcher.query)?;
    let matrix = pipeline::build_matrix(&query, &reference, &config)?;
    let gt = a.truth.load(Some(matrix.cols()))?;
    let searched = pipeline::search_matrix(&matrix, config.reverse_reference);
    let gt_searched = pipeline::search_ground_truth(&gt, config.reverse_reference)?;
    let scores = sweep_sequence_length(
        &searched,
        &gt_searched,
        &frames,
        &config.search,
        within,
        a.truth.warmup,
    )?;
    let rows: Vec<(f64, usize, f64)> = a
        .lengths_m
        .iter()
        .zip(scores)
        .map(|(&m, (l, f))| (m, l, f))
        .collect();
    io::write_sweep(&a.out, &rows)?;

    let mut m = Vec::new();
    push(&mut m, "command", "sweep");
    a.matcher.manifest(&config, &mut m);
    a.truth.manifest(within, &mut m);
    push(
        &mut m,
        "lengths_m",
        a.lengths_m
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    push(&mut m, "out", a.out.display());
    io::write_manifest(manifest_path(&a.out), &m)
}

pub fn cmd_viz(a: &VizArgs) -> Result<()> {
    let set = read_descriptor_file(&a.input)?.into_whole();
    if set.count() < 2 {
        return Err(Error::invalid(format!(
            "projection needs at least 2 descriptors, got {}",
            set.count()
        )));
    }
    io::write_projection(&a.out, &pca_project(&set, a.components)?)?;
    if let Some(path) = &a.normalized_out {
        let (normalized, _) = normalize_batch(&set)?;
        io::write_projection(path, &pca_project(&normalized, a.components)?)?;
    }

    let mut m = Vec::new();
    push(&mut m, "command", "viz");
    push(&mut m, "input", a.input.display());
    push(&mut m, "components", a.components);
    push(&mut m, "out", a.out.display());
    push(
        &mut m,
        "normalized_out",
        a.normalized_out
            .as_ref()
            .map_or("none".to_string(), |p| p.display().to_string()),
    );
    io::write_manifest(manifest_path(&a.out), &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn metric_flags_convert_to_frames() {
        let cli = Cli::try_parse_from([
            "nsdvpr",
            "match",
            "--reference",
            "r.bin",
            "--query",
            "q.bin",
            "--out",
            "m.csv",
            "--seq-len-m",
            "60",
        ])
        .unwrap();
        let Command::Match(a) = cli.command else {
            panic!()
        };
        assert_eq!(a.matcher.search.params().unwrap().seq_len, 30);
        assert_eq!(within_frames(40.0, 2.0).unwrap(), 20);
    }

    #[test]
    fn segmented_mode_without_segments_is_rejected() {
        let cli = Cli::try_parse_from([
            "nsdvpr",
            "match",
            "--reference",
            "r.bin",
            "--query",
            "q.bin",
            "--out",
            "m.csv",
            "--mode",
            "nsd_segmented",
        ])
        .unwrap();
        let Command::Match(a) = cli.command else {
            panic!()
        };
        let err = cmd_match(&a).unwrap_err();
        assert!(err.to_string().contains("segments"), "{err}");
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            manifest_path(Path::new("out/m.csv")),
            Path::new("out/m.manifest.txt")
        );
    }
}
