//! Run configuration and the experiment driver behind the command line.
//!
//! Configuration is a flat TOML document with four sections:
//!
//! ```toml
//! [model]
//! alpha = 0.3        # required
//! s = 0.7            # required
//! h1 = 0.3           # required
//! h2 = 0.4           # required
//! T = 0.1
//! n = 128
//! m = 256
//! f = "sin"          # "sin", "zero" or a number for a constant source
//!
//! [contour]
//! mu = 7
//! nu = "0.1pi"
//! q = "0.05pi"
//! L = 200
//!
//! [experiment]
//! mode = "temporal"  # required: spatial | temporal | timing | single
//! samples = 100
//! resolutions = [8, 16, 32, 64, 128]
//! seed = 42
//! solver = "fast"
//! workers = 1
//! repeats = 3
//!
//! [output]
//! dir = "out"
//! trajectory = false
//! dump_noise = false
//! verbosity = "info"
//! ```
//!
//! Real values may be written as multiples of π, `"0.1pi"`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::contour::ContourParams;
use crate::error::{Error, Result};
use crate::harness::{
    self, write_errors_csv, write_plot_data, write_rates_csv, write_timing_csv, ErrorTable,
    ExperimentConfig, Mode,
};
use crate::noise::HurstPair;
use crate::scheme::{ModelParams, SourceTerm, Variant};

/// Environment variable consulted for the seed when neither the command line
/// nor the file sets one.
pub const SEED_ENV: &str = "FRACSPDE_SEED";

/// Source term as written in a configuration file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    Sin,
    Constant(f64),
}

impl SourceSpec {
    pub fn term(&self) -> SourceTerm {
        match *self {
            SourceSpec::Sin => SourceTerm::sine(),
            SourceSpec::Constant(c) => SourceTerm::Constant(c),
        }
    }
}

/// Everything one run needs, as plain data.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub s: f64,
    pub h1: f64,
    pub h2: f64,
    pub t_final: f64,
    pub n_modes: usize,
    pub steps: usize,
    pub source: SourceSpec,
    pub contour: ContourParams,
    pub mode: Mode,
    pub samples: usize,
    pub resolutions: Vec<usize>,
    pub seed: Option<u64>,
    pub solver: Variant,
    pub workers: usize,
    pub repeats: usize,
    pub out_dir: PathBuf,
    pub trajectory: bool,
    pub dump_noise: bool,
    pub verbosity: String,
}

/// Values from the command line that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub mode: Option<Mode>,
}

fn default_ladder(mode: Mode) -> Vec<usize> {
    match mode {
        Mode::Temporal => vec![8, 16, 32, 64, 128],
        Mode::Spatial => vec![4, 8, 16, 32, 64],
        Mode::Timing => vec![512, 1024, 2048, 4096, 8192],
        Mode::Single => Vec::new(),
    }
}

/// Reads keys out of one section, remembering which were used.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str) -> Result<Self> {
        match root.get(name) {
            None => Ok(Section { name, table: None }),
            Some(Value::Table(t)) => Ok(Section {
                name,
                table: Some(t),
            }),
            Some(_) => Err(Error::Parse(format!("[{name}] must be a table"))),
        }
    }

    fn check_known(&self, known: &[&str]) -> Result<()> {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !known.contains(&k.as_str()) {
                    return Err(Error::Parse(format!(
                        "unknown key '{k}' in [{}]",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn bad(&self, key: &str, want: &str, v: &Value) -> Error {
        Error::Parse(format!("[{}] {key}: expected {want}, got {v}", self.name))
    }

    fn required<T>(&self, key: &str, f: impl Fn(&Self, &str) -> Result<Option<T>>) -> Result<T> {
        f(self, key)?
            .ok_or_else(|| Error::Parse(format!("missing required key '{key}' in [{}]", self.name)))
    }

    fn real(&self, key: &str) -> Result<Option<f64>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        match v {
            Value::Float(x) => Ok(Some(*x)),
            Value::Integer(i) => Ok(Some(*i as f64)),
            Value::String(s) => parse_real(s)
                .map(Some)
                .ok_or_else(|| self.bad(key, "a number or 'xpi'", v)),
            _ => Err(self.bad(key, "a number", v)),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        match v {
            Value::Integer(i) if *i >= 0 => Ok(Some(*i as usize)),
            _ => Err(self.bad(key, "a non-negative integer", v)),
        }
    }

    fn seed(&self, key: &str) -> Result<Option<u64>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        match v {
            Value::Integer(i) if *i >= 0 => Ok(Some(*i as u64)),
            // seeds above i64::MAX do not fit a TOML integer
            Value::String(s) => s
                .trim()
                .parse()
                .map(Some)
                .map_err(|_| self.bad(key, "a u64", v)),
            _ => Err(self.bad(key, "a non-negative integer", v)),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        match v {
            Value::String(s) => Ok(Some(s.clone())),
            _ => Err(self.bad(key, "a string", v)),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        match v {
            Value::Boolean(b) => Ok(Some(*b)),
            _ => Err(self.bad(key, "true or false", v)),
        }
    }

    fn ladder(&self, key: &str) -> Result<Option<Vec<usize>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        match v {
            Value::Array(a) => a
                .iter()
                .map(|x| match x {
                    Value::Integer(i) if *i > 0 => Ok(*i as usize),
                    _ => Err(self.bad(key, "an array of positive integers", v)),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            _ => Err(self.bad(key, "an array of positive integers", v)),
        }
    }
}

/// `"0.1pi"`, `"pi"`, `"-2.5"`.
fn parse_real(s: &str) -> Option<f64> {
    let t = s.trim().to_ascii_lowercase();
    if let Some(head) = t.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let c = if head.is_empty() {
            1.0
        } else {
            head.parse::<f64>().ok()?
        };
        Some(c * std::f64::consts::PI)
    } else {
        t.parse().ok()
    }
}

fn parse_source(s: &Section, key: &str) -> Result<Option<SourceSpec>> {
    let Some(v) = s.get(key) else { return Ok(None) };
    match v {
        Value::String(name) => match name.trim().to_ascii_lowercase().as_str() {
            "sin" => Ok(Some(SourceSpec::Sin)),
            "zero" | "0" => Ok(Some(SourceSpec::Constant(0.0))),
            other => parse_real(other)
                .map(|c| Some(SourceSpec::Constant(c)))
                .ok_or_else(|| s.bad(key, "\"sin\", \"zero\" or a number", v)),
        },
        Value::Float(c) => Ok(Some(SourceSpec::Constant(*c))),
        Value::Integer(c) => Ok(Some(SourceSpec::Constant(*c as f64))),
        _ => Err(s.bad(key, "\"sin\", \"zero\" or a number", v)),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    parse_config_with(source, &Overrides::default())
}

/// As [`parse_config`], with command-line values applied before validation.
pub fn parse_config_with(source: &str, ov: &Overrides) -> Result<RunConfig> {
    let root: Table = source
        .parse()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    for k in root.keys() {
        if !["model", "contour", "experiment", "output"].contains(&k.as_str()) {
            return Err(Error::Parse(format!("unknown section [{k}]")));
        }
    }
    let model = Section::new(&root, "model")?;
    model.check_known(&["alpha", "s", "h1", "h2", "T", "n", "m", "f"])?;
    let contour = Section::new(&root, "contour")?;
    contour.check_known(&["mu", "nu", "q", "L"])?;
    let exp = Section::new(&root, "experiment")?;
    exp.check_known(&[
        "mode",
        "samples",
        "resolutions",
        "seed",
        "solver",
        "workers",
        "repeats",
    ])?;
    let out = Section::new(&root, "output")?;
    out.check_known(&["dir", "trajectory", "dump_noise", "verbosity"])?;

    let mode = match ov.mode {
        Some(m) => m,
        None => exp.required("mode", Section::string)?.parse()?,
    };
    let defaults = ContourParams::default();
    let cfg = RunConfig {
        alpha: model.required("alpha", Section::real)?,
        s: model.required("s", Section::real)?,
        h1: model.required("h1", Section::real)?,
        h2: model.required("h2", Section::real)?,
        t_final: model.real("T")?.unwrap_or(0.1),
        n_modes: model.count("n")?.unwrap_or(64),
        steps: model.count("m")?.unwrap_or(256),
        source: parse_source(&model, "f")?.unwrap_or(SourceSpec::Sin),
        contour: ContourParams {
            half_nodes: contour.count("L")?.unwrap_or(defaults.half_nodes),
            mu: contour.real("mu")?.unwrap_or(defaults.mu),
            nu: contour.real("nu")?.unwrap_or(defaults.nu),
            q: contour.real("q")?.unwrap_or(defaults.q),
        },
        mode,
        samples: exp.count("samples")?.unwrap_or(100),
        resolutions: exp
            .ladder("resolutions")?
            .unwrap_or_else(|| default_ladder(mode)),
        seed: ov.seed.or(exp.seed("seed")?),
        solver: exp
            .string("solver")?
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(Variant::Fast),
        workers: ov.workers.or(exp.count("workers")?).unwrap_or(1),
        repeats: exp.count("repeats")?.unwrap_or(3),
        out_dir: ov
            .out_dir
            .clone()
            .or(out.string("dir")?.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out")),
        trajectory: out.boolean("trajectory")?.unwrap_or(false),
        dump_noise: out.boolean("dump_noise")?.unwrap_or(false),
        verbosity: out.string("verbosity")?.unwrap_or_else(|| "info".into()),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn model(&self) -> Result<ModelParams> {
        let p = ModelParams {
            alpha: self.alpha,
            s: self.s,
            hurst: HurstPair::new(self.h1, self.h2)?,
            t_final: self.t_final,
            n_modes: self.n_modes,
            steps: self.steps,
            source: self.source.term(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks every model, contour and experiment invariant.
    pub fn validate(&self) -> Result<()> {
        self.experiment(0)?.validate()?;
        if !["error", "warn", "info", "debug", "trace", "off"].contains(&self.verbosity.as_str()) {
            return Err(Error::Parse(format!(
                "unknown verbosity '{}'",
                self.verbosity
            )));
        }
        Ok(())
    }

    /// Non-fatal diagnostics for this configuration.
    pub fn warnings(&self) -> Vec<String> {
        self.model().map(|p| p.warnings()).unwrap_or_default()
    }

    pub fn experiment(&self, seed: u64) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            model: self.model()?,
            contour: self.contour,
            samples: self.samples,
            resolutions: self.resolutions.clone(),
            mode: self.mode,
            master_seed: seed,
            solver: self.solver,
            workers: self.workers,
        })
    }

    /// Command line, then file, then `FRACSPDE_SEED`, then 0.
    pub fn resolve_seed(&self, env: Option<&str>) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match env {
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{SEED_ENV}='{v}' is not a u64"))),
            None => Ok(0),
        }
    }

    /// Canonical TOML text; parsing it back gives an equal `RunConfig`.
    pub fn serialize(&self) -> String {
        let f = |x: f64| format!("{x:?}");
        let mut o = String::new();
        let _ = writeln!(o, "[model]");
        let _ = writeln!(o, "alpha = {}", f(self.alpha));
        let _ = writeln!(o, "s = {}", f(self.s));
        let _ = writeln!(o, "h1 = {}", f(self.h1));
        let _ = writeln!(o, "h2 = {}", f(self.h2));
        let _ = writeln!(o, "T = {}", f(self.t_final));
        let _ = writeln!(o, "n = {}", self.n_modes);
        let _ = writeln!(o, "m = {}", self.steps);
        match self.source {
            SourceSpec::Sin => {
                let _ = writeln!(o, "f = \"sin\"");
            }
            SourceSpec::Constant(c) => {
                let _ = writeln!(o, "f = {}", f(c));
            }
        }
        let _ = writeln!(o, "\n[contour]");
        let _ = writeln!(o, "mu = {}", f(self.contour.mu));
        let _ = writeln!(o, "nu = {}", f(self.contour.nu));
        let _ = writeln!(o, "q = {}", f(self.contour.q));
        let _ = writeln!(o, "L = {}", self.contour.half_nodes);
        let _ = writeln!(o, "\n[experiment]");
        let _ = writeln!(o, "mode = \"{}\"", self.mode);
        let _ = writeln!(o, "samples = {}", self.samples);
        let ladder: Vec<String> = self.resolutions.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(o, "resolutions = [{}]", ladder.join(", "));
        if let Some(s) = self.seed {
            let _ = writeln!(o, "seed = \"{s}\"");
        }
        let _ = writeln!(o, "solver = \"{}\"", self.solver);
        let _ = writeln!(o, "workers = {}", self.workers);
        let _ = writeln!(o, "repeats = {}", self.repeats);
        let _ = writeln!(o, "\n[output]");
        let _ = writeln!(
            o,
            "dir = {}",
            Value::String(self.out_dir.to_string_lossy().into_owned())
        );
        let _ = writeln!(o, "trajectory = {}", self.trajectory);
        let _ = writeln!(o, "dump_noise = {}", self.dump_noise);
        let _ = writeln!(o, "verbosity = \"{}\"", self.verbosity);
        o
    }
}

/// Writes a file through a buffer; used for every output of a run.
fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn manifest_text(
    cfg: &RunConfig,
    seed: u64,
    status: &str,
    outputs: &BTreeMap<String, String>,
) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "# fracspde {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "status = {status}");
    let _ = writeln!(m, "seed = {seed}");
    let _ = writeln!(
        m,
        "workers = {}",
        crate::parallel::effective_workers(cfg.workers)
    );
    for w in cfg.warnings() {
        let _ = writeln!(m, "warning = {w}");
    }
    let _ = writeln!(m, "\n# resolved configuration");
    m.push_str(&cfg.serialize());
    if !outputs.is_empty() {
        let _ = writeln!(m, "\n# sha256 of outputs");
        for (name, sum) in outputs {
            let _ = writeln!(m, "{sum}  {name}");
        }
    }
    m
}

fn table_outputs(dir: &Path, t: &ErrorTable, files: &mut Vec<String>) -> Result<()> {
    write_file(&dir.join("errors.csv"), |w| write_errors_csv(t, w))?;
    write_file(&dir.join("rates.csv"), |w| write_rates_csv(t, w))?;
    let pts: Vec<(f64, f64)> = t
        .rows
        .iter()
        .map(|r| (r.resolution as f64, r.error))
        .collect();
    write_file(&dir.join("errors.dat"), |w| write_plot_data(pts, w))?;
    files.extend(["errors.csv", "rates.csv", "errors.dat"].map(String::from));
    Ok(())
}

/// Runs the configured experiment into `cfg.out_dir`.
///
/// `manifest.txt` is written before any computation and rewritten with the
/// checksums of every output at the end.
pub fn run(cfg: &RunConfig, seed: u64) -> Result<()> {
    cfg.validate()?;
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir)?;
    let manifest = dir.join("manifest.txt");
    fs::write(
        &manifest,
        manifest_text(cfg, seed, "running", &BTreeMap::new()),
    )?;

    let result = dispatch(cfg, seed, dir);
    let status = if result.is_ok() { "complete" } else { "failed" };
    let mut sums = BTreeMap::new();
    if let Ok(files) = &result {
        for f in files {
            sums.insert(f.clone(), sha256_hex(&dir.join(f))?);
        }
    }
    fs::write(&manifest, manifest_text(cfg, seed, status, &sums))?;
    result.map(|_| ())
}

fn dispatch(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<Vec<String>> {
    let exp = cfg.experiment(seed)?;
    let mut files = Vec::new();
    match cfg.mode {
        Mode::Temporal => {
            let t = harness::temporal_convergence(&exp)?;
            table_outputs(dir, &t, &mut files)?;
        }
        Mode::Spatial => {
            let t = harness::spatial_convergence(&exp)?;
            table_outputs(dir, &t, &mut files)?;
        }
        Mode::Timing => {
            let t = harness::timing_compare_with(&exp, cfg.repeats)?;
            write_file(&dir.join("timing.csv"), |w| write_timing_csv(&t, w))?;
            let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
            write_file(&dir.join("timing_slopes.csv"), |w| {
                writeln!(w, "classical_slope,fast_slope")?;
                writeln!(w, "{},{}", opt(t.classical_slope), opt(t.fast_slope))?;
                Ok(())
            })?;
            let c: Vec<(f64, f64)> = t
                .rows
                .iter()
                .map(|r| (r.steps as f64, r.classical_seconds))
                .collect();
            let f: Vec<(f64, f64)> = t
                .rows
                .iter()
                .map(|r| (r.steps as f64, r.fast_seconds))
                .collect();
            write_file(&dir.join("timing_classical.dat"), |w| write_plot_data(c, w))?;
            write_file(&dir.join("timing_fast.dat"), |w| write_plot_data(f, w))?;
            files.extend(
                [
                    "timing.csv",
                    "timing_slopes.csv",
                    "timing_classical.dat",
                    "timing_fast.dat",
                ]
                .map(String::from),
            );
        }
        Mode::Single => {
            let (noise, traj) = harness::single_run(&exp)?;
            write_file(&dir.join("trajectory.csv"), |w| {
                if cfg.trajectory {
                    traj.write_csv(w)
                } else {
                    traj.write_final_csv(w)
                }
            })?;
            files.push("trajectory.csv".into());
            if cfg.dump_noise {
                write_file(&dir.join("noise.bin"), |w| noise.write_binary(w))?;
                files.push("noise.bin".into());
            }
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "[model]\nalpha = 0.7\ns = 0.5\nh1 = 0.5\nh2 = 0.5\n[experiment]\nmode = \"single\"\n";

    #[test]
    fn pi_literals() {
        assert_eq!(parse_real("0.1pi"), Some(0.1 * std::f64::consts::PI));
        assert_eq!(parse_real(" 2 * PI "), Some(2.0 * std::f64::consts::PI));
        assert_eq!(parse_real("pi"), Some(std::f64::consts::PI));
        assert_eq!(parse_real("1.5"), Some(1.5));
        assert_eq!(parse_real("xpi"), None);
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.contour, ContourParams::default());
        assert_eq!(c.samples, 100);
        assert_eq!(c.t_final, 0.1);
        assert_eq!(c.source, SourceSpec::Sin);
        assert_eq!(c.seed, None);
    }

    #[test]
    fn seed_priority() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.resolve_seed(None).unwrap(), 0);
        assert_eq!(c.resolve_seed(Some("17")).unwrap(), 17);
        assert!(c.resolve_seed(Some("x")).is_err());
        let with_file = MINIMAL.replace("mode = \"single\"", "mode = \"single\"\nseed = 5");
        let c = parse_config(&with_file).unwrap();
        assert_eq!(c.resolve_seed(Some("17")).unwrap(), 5);
        let ov = Overrides {
            seed: Some(9),
            ..Overrides::default()
        };
        assert_eq!(
            parse_config_with(&with_file, &ov)
                .unwrap()
                .resolve_seed(Some("17"))
                .unwrap(),
            9
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("h2 = 0.5", "h2 = 0.5\nhh = 1");
        assert!(matches!(parse_config(&bad), Err(Error::Parse(_))));
        assert!(parse_config(&format!("{MINIMAL}[extra]\n")).is_err());
    }
}
