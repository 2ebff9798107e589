//! Synthetic heterodyne shots S = a + h† with a thermal noise mode h.
//!
//! Each eigenvector ψ of ρ is sampled from its Husimi density
//! Q(α) = e^{−|α|²}|Σ cₙ α*ⁿ/√n!|²/π by rejection against a complex Gaussian
//! proposal of variance 2, which covers the whole plane; then complex
//! Gaussian noise with E|g|² = N is added.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SingleModeState;
use crate::error::{ensure_nonnegative, Error, Result};
use crate::rng;

/// Shots per independent random stream.
pub const SHOTS_PER_CHUNK: usize = 8192;

/// Proposal variance (E|α|²) of the Gaussian envelope.
const PROPOSAL_VAR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotLabel {
    Signal,
    VacuumReference,
}

impl ShotLabel {
    fn as_str(self) -> &'static str {
        match self {
            ShotLabel::Signal => "signal",
            ShotLabel::VacuumReference => "vacuum_reference",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "signal" => Ok(ShotLabel::Signal),
            "vacuum_reference" => Ok(ShotLabel::VacuumReference),
            other => Err(Error::Format(format!("unknown shot label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IQShotBatch {
    pub shots: Vec<C64>,
    pub label: ShotLabel,
    pub seed: u64,
}

impl IQShotBatch {
    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Format("non-finite shot value".into()));
        }
        Ok(())
    }

    /// CSV with a `# label=…,seed=…,n_shots=…` preamble and `i,q` columns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# label={},seed={},n_shots={}", self.label.as_str(), self.seed, self.len())?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "q"])?;
        for z in &self.shots {
            wr.write_record([format!("{:.17e}", z.re), format!("{:.17e}", z.im)])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let meta = first
            .trim()
            .strip_prefix("# ")
            .ok_or_else(|| Error::Format("missing shot-batch preamble".into()))?;
        let mut label = None;
        let mut seed = None;
        let mut n_shots = None;
        for kv in meta.split(',') {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Format(format!("bad preamble field `{kv}`")))?;
            match k {
                "label" => label = Some(ShotLabel::parse(v)?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| Error::Format(e.to_string()))?),
                "n_shots" => n_shots = Some(v.parse::<usize>().map_err(|e| Error::Format(e.to_string()))?),
                _ => return Err(Error::Format(format!("unknown preamble key `{k}`"))),
            }
        }
        let mut rd = csv::Reader::from_reader(r);
        let mut shots = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Format("shot rows need exactly two columns".into()));
            }
            let p = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Format(e.to_string()));
            shots.push(C64::new(p(&rec[0])?, p(&rec[1])?));
        }
        let batch = IQShotBatch {
            shots,
            label: label.ok_or_else(|| Error::Format("preamble lacks label".into()))?,
            seed: seed.ok_or_else(|| Error::Format("preamble lacks seed".into()))?,
        };
        if n_shots.is_some_and(|n| n != batch.len()) {
            return Err(Error::Format("row count disagrees with preamble".into()));
        }
        batch.validate()?;
        Ok(batch)
    }
}

/// Rejection sampler for the Husimi density of one pure state.
struct HusimiSampler {
    coeffs: Vec<C64>,
    /// sup over α of Q(α)/g(α)
    bound: f64,
}

impl HusimiSampler {
    fn new(coeffs: Vec<C64>) -> Self {
        // |Σ cₙ zⁿ/√n!| ≤ Σ|cₙ| rⁿ/√n!, so the ratio is bounded by a radial function
        let mags: Vec<f64> = coeffs.iter().map(|c| c.norm()).collect();
        let s = PROPOSAL_VAR;
        let mut bound: f64 = 0.0;
        let steps = 6000;
        for i in 0..=steps {
            let r = 15.0 * i as f64 / steps as f64;
            let mut poly = 0.0;
            let mut pw = 1.0;
            for (n, m) in mags.iter().enumerate() {
                if n > 0 {
                    pw *= r / (n as f64).sqrt();
                }
                poly += m * pw;
            }
            let ratio = s * (-(r * r) * (1.0 - 1.0 / s)).exp() * poly * poly;
            bound = bound.max(ratio);
        }
        HusimiSampler { coeffs, bound: bound * 1.05 }
    }

    /// Q(α)/g(α).
    fn ratio(&self, alpha: C64) -> f64 {
        let z = alpha.conj();
        let mut acc = C64::new(0.0, 0.0);
        let mut pw = C64::new(1.0, 0.0);
        for (n, c) in self.coeffs.iter().enumerate() {
            if n > 0 {
                pw = pw * z / (n as f64).sqrt();
            }
            acc += c * pw;
        }
        let s = PROPOSAL_VAR;
        s * (-alpha.norm_sqr() * (1.0 - 1.0 / s)).exp() * acc.norm_sqr()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> C64 {
        let sd = (PROPOSAL_VAR / 2.0).sqrt();
        loop {
            let x: f64 = StandardNormal.sample(rng);
            let y: f64 = StandardNormal.sample(rng);
            let alpha = C64::new(x * sd, y * sd);
            let u: f64 = rng.random();
            if u * self.bound < self.ratio(alpha) {
                return alpha;
            }
        }
    }
}

/// Draw `n_shots` heterodyne outcomes of `state` with `added_noise` thermal
/// quanta. Deterministic in `seed` regardless of thread count.
pub fn synthesize_shots(
    state: &SingleModeState,
    added_noise: f64,
    n_shots: usize,
    seed: u64,
    label: ShotLabel,
) -> Result<IQShotBatch> {
    state.validate()?;
    ensure_nonnegative("added noise", added_noise)?;
    if n_shots == 0 {
        return Err(Error::domain("n_shots must be at least 1"));
    }
    let (vals, vecs) = state.eigen();
    let weights: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let samplers: Vec<Option<HusimiSampler>> = (0..vals.len())
        .map(|k| (weights[k] > 0.0).then(|| HusimiSampler::new(column(&vecs, k))))
        .collect();
    let noise_sd = (added_noise / 2.0).sqrt();
    let n_chunks = n_shots.div_ceil(SHOTS_PER_CHUNK);
    let shots: Vec<C64> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = rng::stream(seed, chunk as u64);
            let len = SHOTS_PER_CHUNK.min(n_shots - chunk * SHOTS_PER_CHUNK);
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                let u: f64 = rng.random();
                let k = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
                let k = if samplers[k].is_some() { k } else { last_live(&samplers) };
                let alpha = samplers[k].as_ref().expect("at least one live eigenvector").sample(&mut rng);
                let gx: f64 = StandardNormal.sample(&mut rng);
                let gy: f64 = StandardNormal.sample(&mut rng);
                out.push(alpha + C64::new(gx * noise_sd, gy * noise_sd));
            }
            out
        })
        .collect();
    Ok(IQShotBatch { shots, label, seed })
}

fn column(m: &DMatrix<C64>, k: usize) -> Vec<C64> {
    m.column(k).iter().cloned().collect()
}

fn last_live(s: &[Option<HusimiSampler>]) -> usize {
    s.iter().rposition(|x| x.is_some()).unwrap_or(0)
}
