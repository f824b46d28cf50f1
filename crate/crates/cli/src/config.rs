//! Experiment configuration: file fields, flag overrides and validation.
//!
//! Precedence, lowest first: command defaults, the `--config` JSON file,
//! command-line flags. `WIGNER_GAPS_WORKERS` counts as the `--workers` flag.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use wigner_gaps::dynamics::{DEFAULT_DT, MAX_EULER_DT};
use wigner_gaps::ensembles::standardize;
use wigner_gaps::{AtomicLaw, CouplingScheme, EntryLaw, SymmetryClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    MomentMatch,
    SampleGaps,
    MinGap,
    Relax,
    LocalLaw,
    Kernel,
    Compare,
    Rate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::MomentMatch => "moment-match",
            Command::SampleGaps => "sample-gaps",
            Command::MinGap => "min-gap",
            Command::Relax => "relax",
            Command::LocalLaw => "local-law",
            Command::Kernel => "kernel",
            Command::Compare => "compare",
            Command::Rate => "rate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassArg {
    Real,
    Complex,
}

impl From<ClassArg> for SymmetryClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Real => SymmetryClass::RealSymmetric,
            ClassArg::Complex => SymmetryClass::ComplexHermitian,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CouplingArg {
    Entrywise,
    Eigenframe,
}

impl From<CouplingArg> for CouplingScheme {
    fn from(c: CouplingArg) -> Self {
        match c {
            CouplingArg::Entrywise => CouplingScheme::Entrywise,
            CouplingArg::Eigenframe => CouplingScheme::Eigenframe,
        }
    }
}

/// Optional settings shared by the config file and the command line.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Entry law: `rademacher`, `gaussian`, `equispaced:<atoms>` or inline JSON.
    #[arg(long, value_parser = parse_ensemble)]
    pub ensemble: Option<EntryLaw>,
    #[arg(long, value_enum)]
    pub class: Option<ClassArg>,
    /// Matrix sizes, comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    #[serde(rename = "N")]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Moment orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "WIGNER_GAPS_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub coupling: Option<CouplingArg>,
    /// Spectral energies E, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub energies: Option<Vec<f64>>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub x: Option<f64>,
    /// Kernel separations u, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub u: Option<Vec<f64>>,
    /// Input table for `rate`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

fn parse_ensemble(s: &str) -> Result<EntryLaw, String> {
    match s {
        "rademacher" => Ok(EntryLaw::rademacher()),
        "gaussian" => Ok(EntryLaw::StandardGaussian),
        _ => {
            if let Some(k) = s.strip_prefix("equispaced:") {
                let k: usize = k.parse().map_err(|e| format!("bad atom count: {e}"))?;
                return equispaced_standard(k).map_err(|e| e.to_string());
            }
            serde_json::from_str(s).map_err(|e| format!("unrecognised ensemble {s:?}: {e}"))
        }
    }
}

/// Standardized law with `k` equally weighted, equally spaced atoms.
pub fn equispaced_standard(k: usize) -> wigner_gaps::Result<EntryLaw> {
    standardize(&EntryLaw::Atomic(AtomicLaw::equispaced(k, 1.0)?))
}

impl Overrides {
    /// Fields of `top` win over fields of `self`.
    pub fn overlay(self, top: Overrides) -> Overrides {
        Overrides {
            ensemble: top.ensemble.or(self.ensemble),
            class: top.class.or(self.class),
            n: top.n.or(self.n),
            reps: top.reps.or(self.reps),
            alpha: top.alpha.or(self.alpha),
            epsilon: top.epsilon.or(self.epsilon),
            t: top.t.or(self.t),
            dt: top.dt.or(self.dt),
            p: top.p.or(self.p),
            seed: top.seed.or(self.seed),
            workers: top.workers.or(self.workers),
            out: top.out.or(self.out),
            coupling: top.coupling.or(self.coupling),
            energies: top.energies.or(self.energies),
            eta: top.eta.or(self.eta),
            x: top.x.or(self.x),
            u: top.u.or(self.u),
            input: top.input.or(self.input),
        }
    }
}

/// Fully resolved configuration.
///
/// `workers` and `out` are not serialized: they do not affect results, so
/// the config echo (and hence the manifest id) is the same for any worker
/// count or output directory.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub ensemble: EntryLaw,
    pub class: ClassArg,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub reps: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub t: f64,
    pub dt: f64,
    pub p: Vec<usize>,
    pub master_seed: u64,
    pub coupling: CouplingArg,
    pub energies: Vec<f64>,
    /// `None` means `N^{-0.6}` per matrix size.
    pub eta: Option<f64>,
    pub x: f64,
    pub u: Vec<f64>,
    pub input: Option<PathBuf>,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

fn defaults(command: Command) -> Overrides {
    let mut d = Overrides {
        ensemble: Some(EntryLaw::rademacher()),
        class: Some(ClassArg::Real),
        n: Some(vec![100]),
        reps: Some(100),
        alpha: Some(0.1),
        epsilon: Some(0.2),
        t: Some(0.5),
        dt: Some(DEFAULT_DT),
        p: Some(vec![2]),
        seed: Some(0),
        coupling: Some(CouplingArg::Eigenframe),
        energies: Some(vec![-1.0, 0.0, 1.0]),
        x: Some(0.0),
        u: Some(vec![1e-4, 2e-4, 3e-4, 4e-4, 5e-4]),
        ..Overrides::default()
    };
    match command {
        Command::SampleGaps => {
            d.n = Some(vec![64]);
        }
        Command::MinGap => {
            d.ensemble = Some(EntryLaw::StandardGaussian);
            d.class = Some(ClassArg::Complex);
            d.n = Some(vec![150]);
            d.reps = Some(1000);
        }
        Command::Relax => {
            d.t = Some(1.0);
            d.reps = Some(10);
        }
        Command::LocalLaw => {
            d.ensemble = Some(EntryLaw::StandardGaussian);
            d.n = Some(vec![400]);
            d.reps = Some(50);
        }
        Command::Kernel => {
            d.n = Some(vec![200]);
        }
        Command::Compare => {
            d.ensemble = equispaced_standard(6).ok();
            d.p = Some(vec![2, 4]);
            d.reps = Some(1000);
            d.eta = Some(0.1);
            d.energies = Some(vec![0.0]);
        }
        Command::MomentMatch | Command::Rate => {}
    }
    d
}

/// Read the `--config` file, if any.
pub fn load_file(path: &Path) -> Result<Overrides, Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| vec![format!("config: cannot read {}: {e}", path.display())])?;
    serde_json::from_str(&text).map_err(|e| vec![format!("config: {}: {e}", path.display())])
}

/// Merge defaults, file and flags, then check every module precondition.
/// All violations are collected before returning.
pub fn resolve(command: Command, file: Overrides, flags: Overrides) -> Result<ExperimentConfig, Vec<String>> {
    let o = defaults(command).overlay(file).overlay(flags);
    let cfg = ExperimentConfig {
        command,
        ensemble: o.ensemble.expect("default"),
        class: o.class.expect("default"),
        n: o.n.expect("default"),
        reps: o.reps.expect("default"),
        alpha: o.alpha.expect("default"),
        epsilon: o.epsilon.expect("default"),
        t: o.t.expect("default"),
        dt: o.dt.expect("default"),
        p: o.p.expect("default"),
        master_seed: o.seed.expect("default"),
        coupling: o.coupling.expect("default"),
        energies: o.energies.expect("default"),
        eta: o.eta,
        x: o.x.expect("default"),
        u: o.u.expect("default"),
        input: o.input,
        workers: o.workers.unwrap_or_else(wigner_gaps::runner::default_workers).max(1),
        out: o.out.unwrap_or_else(|| PathBuf::from("out")),
    };
    let v = validate(&cfg);
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(v)
    }
}

fn validate(c: &ExperimentConfig) -> Vec<String> {
    use Command::*;
    let mut v = Vec::new();
    let cmd = c.command;
    let uses = |cmds: &[Command]| cmds.contains(&cmd);

    if uses(&[SampleGaps, MinGap, Relax, LocalLaw, Kernel, Compare]) {
        if c.n.is_empty() {
            v.push("N: at least one matrix size is required".into());
        }
        for &n in &c.n {
            if n < 2 {
                v.push(format!("N: {n} is below the minimum 2"));
            }
        }
    }
    if uses(&[SampleGaps, MinGap, Relax, LocalLaw, Compare]) && !c.ensemble.is_standardized() {
        v.push(format!(
            "ensemble: not standardized (mean {:e}, variance {})",
            c.ensemble.mean(),
            c.ensemble.variance()
        ));
    }
    if uses(&[SampleGaps, MinGap, Relax]) && !(c.alpha > 0.0 && c.alpha < 0.5) {
        v.push(format!("alpha: {} outside (0, 1/2)", c.alpha));
    }
    if uses(&[SampleGaps, MinGap, Relax]) {
        for &n in &c.n {
            let (lo, hi) = wigner_gaps::spectra::bulk_index_range(n, c.alpha);
            if n >= 2 && c.alpha > 0.0 && c.alpha < 0.5 && lo > hi {
                v.push(format!("alpha: no bulk gaps for N = {n} and alpha = {}", c.alpha));
            }
        }
    }
    if uses(&[MomentMatch, Compare]) {
        match &c.ensemble {
            EntryLaw::Atomic(a) => {
                if !c.ensemble.is_standardized() && cmd == MomentMatch {
                    v.push("ensemble: not standardized".into());
                }
                for &p in &c.p {
                    if p == 0 {
                        v.push("p: moment orders must be at least 1".into());
                    } else if a.len() < p {
                        v.push(format!("p: {p} exceeds the number of atoms {}", a.len()));
                    }
                }
            }
            _ => v.push("ensemble: moment matching needs an atomic law".into()),
        }
        if c.p.is_empty() {
            v.push("p: at least one moment order is required".into());
        }
        if !(c.t >= 0.0 && c.t < 1.0) {
            v.push(format!("t: {} outside [0, 1)", c.t));
        }
    }
    if cmd == Relax {
        if !(c.t > 0.0 && c.t.is_finite()) {
            v.push(format!("t: {} must be positive", c.t));
        }
        if !(c.dt > 0.0 && c.dt <= MAX_EULER_DT) {
            v.push(format!("dt: {} outside (0, {MAX_EULER_DT}]", c.dt));
        } else if c.dt > c.t {
            v.push(format!("dt: {} exceeds t = {}", c.dt, c.t));
        }
    }
    if cmd == LocalLaw {
        if !(c.epsilon > 0.0 && c.epsilon < 0.5) {
            v.push(format!("epsilon: {} outside (0, 1/2)", c.epsilon));
        }
        if let Some(eta) = c.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                v.push(format!("eta: {eta} must be positive"));
            }
        }
    }
    if uses(&[LocalLaw, Compare]) {
        if c.energies.is_empty() {
            v.push("energies: at least one energy is required".into());
        }
        if c.energies.iter().any(|e| !e.is_finite()) {
            v.push("energies: must be finite".into());
        }
    }
    if cmd == Compare {
        let eta = c.eta.unwrap_or(f64::NAN);
        for &n in &c.n {
            if !(eta >= 1.0 / n as f64) {
                v.push(format!("eta: {eta} below the floor 1/N for N = {n}"));
            }
        }
        if c.class != ClassArg::Real {
            v.push("class: compare runs in the real symmetric class only".into());
        }
    }
    if cmd == Kernel {
        if !(c.x.abs() < 2.0) {
            v.push(format!("x: {} outside the bulk (-2, 2)", c.x));
        }
        if c.u.is_empty() {
            v.push("u: at least one separation is required".into());
        }
        for &u in &c.u {
            if !(u > 0.0 && u.is_finite()) {
                v.push(format!("u: {u} must be positive"));
            }
        }
    }
    if cmd == Rate {
        match &c.input {
            None => v.push("input: `rate` needs --input <csv>".into()),
            Some(p) if !p.is_file() => v.push(format!("input: {} does not exist", p.display())),
            _ => {}
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Overrides {
            reps: Some(7),
            alpha: Some(0.2),
            ..Default::default()
        };
        let flags = Overrides {
            reps: Some(9),
            ..Default::default()
        };
        let c = resolve(Command::SampleGaps, file, flags).unwrap();
        assert_eq!(c.reps, 9);
        assert_eq!(c.alpha, 0.2);
        assert_eq!(c.n, vec![64]);
    }

    #[test]
    fn every_violation_is_listed() {
        let flags = Overrides {
            n: Some(vec![1]),
            alpha: Some(0.7),
            dt: Some(0.5),
            ..Default::default()
        };
        let v = resolve(Command::Relax, Overrides::default(), flags).unwrap_err();
        assert!(v.iter().any(|s| s.starts_with("N:")), "{v:?}");
        assert!(v.iter().any(|s| s.starts_with("alpha:")), "{v:?}");
        assert!(v.iter().any(|s| s.starts_with("dt:")), "{v:?}");
    }

    #[test]
    fn ensemble_parsing() {
        assert_eq!(parse_ensemble("rademacher").unwrap(), EntryLaw::rademacher());
        assert!(parse_ensemble("equispaced:6").unwrap().is_standardized());
        let json = r#"{"type":"atomic","points":[-1.0,1.0],"weights":[0.5,0.5]}"#;
        assert_eq!(parse_ensemble(json).unwrap(), EntryLaw::rademacher());
        assert!(parse_ensemble("bogus").is_err());
    }

    #[test]
    fn unknown_file_fields_are_rejected() {
        let r: Result<Overrides, _> = serde_json::from_str(r#"{"reps": 3, "bogus": 1}"#);
        assert!(r.is_err());
        let r: Overrides = serde_json::from_str(r#"{"N": [64, 128], "ensemble": {"type": "gaussian"}}"#).unwrap();
        assert_eq!(r.n, Some(vec![64, 128]));
    }

    #[test]
    fn echo_ignores_workers_and_out() {
        let mk = |w, o: &str| {
            let flags = Overrides {
                workers: Some(w),
                out: Some(o.into()),
                ..Default::default()
            };
            serde_json::to_string(&resolve(Command::Kernel, Overrides::default(), flags).unwrap()).unwrap()
        };
        assert_eq!(mk(1, "a"), mk(8, "b"));
    }
}
