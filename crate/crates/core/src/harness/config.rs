use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::adaptive::RepresentativePolicy;
use crate::error::{Error, Result};
use crate::infection::InfectionParamsII;
use crate::nonadaptive::ClearingRule;
use crate::seed;
use crate::structure::{
    pairwise_overlap_structure, random_structure, CommunityStructure, DegreeDistribution,
    RandomStructureParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    /// Fresh random structure per index, seeded from the master seed.
    Random {
        target_communities: usize,
        size_range: (usize, usize),
        max_degree: usize,
        degree_distribution: DegreeDistribution,
    },
    Pairwise {
        f: usize,
        f_o: usize,
        m: usize,
        m_o: usize,
    },
    /// Structure JSON file; every structure index uses the same structure.
    File { path: PathBuf },
}

impl Default for StructureSpec {
    fn default() -> Self {
        let p = RandomStructureParams::evaluation_scale(0);
        StructureSpec::Random {
            target_communities: p.target_communities,
            size_range: p.size_range,
            max_degree: p.max_degree,
            degree_distribution: p.degree_distribution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSpec {
    Uniform { p: f64 },
    /// Each community's rate drawn uniformly from `[lo, hi]`.
    Range { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfectionSpec {
    pub q: f64,
    pub rates: RateSpec,
}

impl Default for InfectionSpec {
    fn default() -> Self {
        Self {
            q: 0.05,
            rates: RateSpec::Range { lo: 0.3, hi: 0.9 },
        }
    }
}

/// Pairwise-overlap setting for the two-stage error formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaSpec {
    pub f: usize,
    pub f_o: usize,
    pub m: usize,
    pub m_o: usize,
    pub q: f64,
    pub p: f64,
}

impl Default for LemmaSpec {
    fn default() -> Self {
        Self {
            f: 150,
            f_o: 60,
            m: 10,
            m_o: 2,
            q: 0.2,
            p: 0.2,
        }
    }
}

/// Population for the Bernoulli-design COMP formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraditionalSpec {
    pub n: usize,
    pub k: usize,
}

impl Default for TraditionalSpec {
    fn default() -> Self {
        Self { n: 1600, k: 160 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    G1g2,
    Ccw,
    Bernoulli,
}

impl DesignKind {
    pub fn name(self) -> &'static str {
        match self {
            DesignKind::G1g2 => "g1g2",
            DesignKind::Ccw => "ccw",
            DesignKind::Bernoulli => "bernoulli",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Comp,
    NcLbp,
    CLbp,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Comp => "comp",
            DecoderKind::NcLbp => "nc_lbp",
            DecoderKind::CLbp => "c_lbp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub structure: StructureSpec,
    /// Number of structures (random structures are independent draws).
    pub structures: usize,
    pub infection: InfectionSpec,
    /// Infection draws per structure.
    pub trials: usize,
    pub master_seed: u64,
    /// Z-channel flip probability.
    pub z: f64,
    pub thetas: Vec<f64>,
    pub representatives: RepresentativePolicy,
    pub t_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub designs: Vec<DesignKind>,
    pub decoders: Vec<DecoderKind>,
    /// How `G1` outcomes clear members in the two-stage decoder.
    pub clearing: ClearingRule,
    pub lbp_iters: usize,
    pub threshold: f64,
    pub c_grid: Vec<usize>,
    pub lemma: LemmaSpec,
    pub traditional: TraditionalSpec,
    /// Adds a wall-time column; output is then no longer reproducible.
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            structure: StructureSpec::default(),
            structures: 1,
            infection: InfectionSpec::default(),
            trials: 10,
            master_seed: 0,
            z: 0.0,
            thetas: vec![0.5],
            representatives: RepresentativePolicy::All,
            t_grid: (300..=2100).step_by(300).collect(),
            alpha_grid: (1..=10).map(|i| i as f64 / 10.0).collect(),
            designs: vec![DesignKind::G1g2, DesignKind::Ccw],
            decoders: vec![DecoderKind::Comp, DecoderKind::NcLbp, DecoderKind::CLbp],
            clearing: ClearingRule::Communities,
            lbp_iters: crate::lbp::DEFAULT_ITERS,
            threshold: crate::lbp::DEFAULT_THRESHOLD,
            c_grid: vec![1, 2, 4, 5],
            lemma: LemmaSpec::default(),
            traditional: TraditionalSpec::default(),
            timing: false,
            output: None,
        }
    }
}

const STRUCTURE: u64 = 0x5354;
const RATES: u64 = 0x5241;
const STATE: u64 = 0x5354_4154;

fn unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("{name} = {x} is outside [0, 1]")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.structures == 0 {
            return Err(Error::InvalidParameter("trials and structures must be >= 1".into()));
        }
        for (name, empty) in [
            ("thetas", self.thetas.is_empty()),
            ("t_grid", self.t_grid.is_empty()),
            ("alpha_grid", self.alpha_grid.is_empty()),
            ("c_grid", self.c_grid.is_empty()),
            ("designs", self.designs.is_empty()),
            ("decoders", self.decoders.is_empty()),
        ] {
            if empty {
                return Err(Error::InvalidParameter(format!("{name} must not be empty")));
            }
        }
        unit("z", self.z)?;
        unit("q", self.infection.q)?;
        match self.infection.rates {
            RateSpec::Uniform { p } => unit("p", p)?,
            RateSpec::Range { lo, hi } => {
                unit("rate lower bound", lo)?;
                unit("rate upper bound", hi)?;
                if lo > hi {
                    return Err(Error::InvalidParameter("rate range is empty".into()));
                }
            }
        }
        for &t in &self.thetas {
            unit("theta", t)?;
        }
        for &a in &self.alpha_grid {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidParameter(format!("alpha = {a} is outside (0, 1]")));
            }
        }
        if self.t_grid.contains(&0) || self.c_grid.contains(&0) {
            return Err(Error::InvalidParameter("T and c values must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidParameter("threshold must be in (0, 1)".into()));
        }
        unit("lemma q", self.lemma.q)?;
        unit("lemma p", self.lemma.p)?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    /// SHA-256 of the canonical JSON form. The output path is left out so
    /// the same run hashes the same wherever it is written.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            output: None,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        super::sha256_hex(json.as_bytes())
    }

    pub fn structure_seed(&self, i: usize) -> u64 {
        seed::derive(self.master_seed, &[STRUCTURE, i as u64])
    }

    pub fn state_seed(&self, i: usize, trial: usize) -> u64 {
        seed::derive(self.master_seed, &[STATE, i as u64, trial as u64])
    }

    /// Seed for one algorithm run, keyed by structure, trial and algorithm.
    pub fn run_seed(&self, i: usize, trial: usize, algorithm: &str, extra: &[u64]) -> u64 {
        let mut labels = vec![i as u64, trial as u64, seed::label(algorithm)];
        labels.extend_from_slice(extra);
        seed::derive(self.master_seed, &labels)
    }

    pub fn build_structure(&self, i: usize) -> Result<CommunityStructure> {
        match &self.structure {
            StructureSpec::Random {
                target_communities,
                size_range,
                max_degree,
                degree_distribution,
            } => random_structure(&RandomStructureParams {
                target_communities: *target_communities,
                size_range: *size_range,
                max_degree: *max_degree,
                degree_distribution: *degree_distribution,
                seed: self.structure_seed(i),
            }),
            StructureSpec::Pairwise { f, f_o, m, m_o } => pairwise_overlap_structure(*f, *f_o, *m, *m_o),
            StructureSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn build_params(&self, s: &CommunityStructure, i: usize) -> Result<InfectionParamsII> {
        match self.infection.rates {
            RateSpec::Uniform { p } => InfectionParamsII::uniform(self.infection.q, p, s.num_communities()),
            RateSpec::Range { lo, hi } => InfectionParamsII::random_rates(
                self.infection.q,
                lo,
                hi,
                s.num_communities(),
                seed::derive(self.master_seed, &[RATES, i as u64]),
            ),
        }
    }
}
