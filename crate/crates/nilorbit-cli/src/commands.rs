use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use num_bigint::BigUint;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use nilorbit::equidist::{self, char_poly, equidist_verdict, weyl_sum, HorizontalCharacter, Obstruction, ProgressionReport};
use nilorbit::group::lower_central_series;
use nilorbit::nilmanifold::e;
use nilorbit::polymap::{from_binomial, PolyMap, PolyMapJson};
use nilorbit::scalar::Scalar;
use nilorbit::uniformity::{self, doubling, gowers_direct, gowers_recursive, vdc_bound, vn_metastable, SeqFn, VdcReport, VnReport};
use nilorbit::walsh::{bound_recursion, complexity_certify_with_budget, replay, CertStep, WalshSystem, DEFAULT_BUDGET};
use nilorbit::wwdyn::{bfko_estimate, character_net, doubling_ladder, ww_uniform_sup, BfkoReport, ModelSystem, NilWeight, ObsFn, SupRow};

use crate::output::{roundtrip, to_json, Envelope, SCHEMA_VERSION};

pub struct Outcome {
    pub json: String,
    pub value: Value,
    /// Key under `result` rendered as a CSV table.
    pub table: Option<&'static str>,
    pub inconsistent: bool,
}

fn finish<P: Serialize, R: Serialize>(
    command: &str,
    seed: u64,
    params: &P,
    result: &R,
    table: Option<&'static str>,
    inconsistent: bool,
) -> Result<Outcome> {
    let env = Envelope { schema_version: SCHEMA_VERSION, command: command.to_string(), seed, params, result };
    Ok(Outcome { json: to_json(&env)?, value: serde_json::to_value(&env)?, table, inconsistent })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    schema_version: u32,
    #[serde(default)]
    filtration: FiltrationKind,
    maps: Vec<PolyMapJson>,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum FiltrationKind {
    #[default]
    Lcs,
}

fn load_maps(path: &PathBuf) -> Result<(Vec<PolyMap>, usize)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: MapFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.schema_version != SCHEMA_VERSION {
        bail!("{}: schema_version {} is not {SCHEMA_VERSION}", path.display(), file.schema_version);
    }
    let FiltrationKind::Lcs = file.filtration;
    let maps = file.maps.iter().map(PolyMap::from_json).collect::<Result<Vec<_>, _>>()?;
    let dim = maps.first().map(|m| m.dim()).ok_or_else(|| anyhow!("{}: no maps", path.display()))?;
    if maps.iter().any(|m| m.dim() != dim) {
        bail!("{}: maps of different dimensions", path.display());
    }
    Ok((maps, dim))
}

fn load_single(path: &PathBuf) -> Result<PolyMap> {
    let (mut maps, _) = load_maps(path)?;
    if maps.len() != 1 {
        bail!("{}: expected exactly one map, found {}", path.display(), maps.len());
    }
    Ok(maps.remove(0))
}

// complexity

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct ComplexityArgs {
    /// JSON file with the maps of the system
    #[arg(long)]
    pub spec: PathBuf,
    /// Depth cap for the reduction search (default: from the bound recursion)
    #[arg(long)]
    pub cap: Option<usize>,
    /// Maximum number of search nodes
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    /// Include the derivation steps
    #[arg(long)]
    pub tree: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityResult {
    pub size: usize,
    pub degree: Option<usize>,
    pub bound: usize,
    /// c(d, j) from the closed-form recursion, as a decimal string; null on overflow.
    pub recursion_bound: Option<String>,
    pub nodes: usize,
    pub replayed: bool,
    pub steps: Option<Vec<CertStep>>,
}

pub fn complexity(a: &ComplexityArgs, seed: u64) -> Result<Outcome> {
    let (maps, dim) = load_maps(&a.spec)?;
    let p = lower_central_series(dim);
    let s = WalshSystem::new(maps, p.clone())?;
    let cert = complexity_certify_with_budget(&s, a.cap, a.budget)?;
    let rec = bound_recursion(p.length().map(|d| d as u32), s.size() as u128);
    let replayed = replay(&cert).is_ok();
    let within = rec.map_or(true, |r| cert.bound as u128 <= r);
    let r = ComplexityResult {
        size: s.size(),
        degree: p.length(),
        bound: cert.bound,
        recursion_bound: rec.map(|v| v.to_string()),
        nodes: cert.nodes,
        replayed,
        steps: a.tree.then(|| cert.steps.clone()),
    };
    finish("complexity", seed, a, &r, None, !(replayed && within))
}

// orbit

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct OrbitArgs {
    /// JSON file with a single map
    #[arg(long)]
    pub spec: PathBuf,
    /// Number of points
    #[arg(long = "N", default_value_t = 1024)]
    #[serde(rename = "N")]
    pub n: usize,
    /// Progression step: points are {g(a·m + b)}
    #[arg(long, default_value_t = 1)]
    pub a: i64,
    #[arg(long, default_value_t = 0)]
    pub b: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointRow {
    pub m: usize,
    pub coords: Vec<f64>,
    pub on_boundary: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitResult {
    pub dim: usize,
    pub boundary_hits: usize,
    pub points: Vec<PointRow>,
}

pub fn orbit(a: &OrbitArgs, seed: u64) -> Result<Outcome> {
    let g = load_single(&a.spec)?;
    let o = equidist::orbit(&g, a.a, a.b, a.n)?;
    let points = o
        .points
        .iter()
        .enumerate()
        .map(|(m, p)| PointRow { m, coords: p.coords.clone(), on_boundary: !p.boundary.is_empty() })
        .collect();
    let r = OrbitResult { dim: g.dim(), boundary_hits: o.boundary_hits, points };
    finish("orbit", seed, a, &r, Some("points"), false)
}

// equidist

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct EquidistArgs {
    /// JSON file with a single map
    #[arg(long)]
    pub spec: PathBuf,
    /// Largest ladder point
    #[arg(long = "N", default_value_t = 1 << 16)]
    #[serde(rename = "N")]
    pub n: usize,
    /// Height bound for horizontal characters
    #[arg(long, default_value_t = equidist::DEFAULT_HEIGHT)]
    pub height: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylRow {
    pub k: Vec<i64>,
    /// |E_{n<N} e(η(g(n)))|
    pub modulus: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquidistResult {
    pub verdict: String,
    pub witness: Option<Obstruction>,
    pub consistent: bool,
    pub note: String,
    pub ladder: Vec<usize>,
    pub discrepancy_ladder: Vec<ProgressionReport>,
    pub weyl_table: Vec<WeylRow>,
}

/// Nonzero k with max |k_i| ≤ h and first nonzero entry positive.
fn characters(len: usize, h: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out.into_iter().flat_map(|v| (-h..=h).map(move |k| [v.clone(), vec![k]].concat())).collect();
    }
    out.retain(|k| k.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0));
    out
}

pub fn equidist(a: &EquidistArgs, seed: u64) -> Result<Outcome> {
    if a.n == 0 {
        bail!("--N must be positive");
    }
    if a.height < 1 {
        bail!("--height must be at least 1");
    }
    let g = load_single(&a.spec)?;
    let mut ladder: Vec<usize> = equidist::LADDER.iter().copied().filter(|&n| n < a.n).collect();
    ladder.push(a.n);
    let v = equidist_verdict(&g, &ladder, a.height)?;
    let weyl_table = characters(g.dim() - 1, a.height)
        .into_iter()
        .map(|k| {
            let theta = from_binomial(&char_poly(&HorizontalCharacter(k.clone()), &g)?);
            Ok(WeylRow { k, modulus: weyl_sum(&theta, a.n).norm() })
        })
        .collect::<Result<Vec<_>>>()?;
    let r = EquidistResult {
        verdict: v.verdict,
        witness: v.witness,
        consistent: v.consistent,
        note: v.note,
        ladder,
        discrepancy_ladder: v.progressions,
        weyl_table,
    };
    let bad = !r.consistent;
    finish("equidist", seed, a, &r, None, bad)
}

// gowers

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug)]
#[serde(rename_all = "snake_case")]
pub enum GowersSeq {
    /// Uniform in the unit disc
    Random,
    /// ±1 with equal probability
    Signs,
    Ones,
    /// e(freq·x/n)
    Character,
}

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct GowersArgs {
    /// Period of the cyclic group
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Norm order, 1 ≤ l ≤ 4
    #[arg(long, default_value_t = 2)]
    pub l: usize,
    #[arg(long, value_enum, default_value_t = GowersSeq::Random)]
    pub seq: GowersSeq,
    /// Frequency for --seq character
    #[arg(long, default_value_t = 1)]
    pub freq: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GowersResult {
    pub direct: f64,
    pub recursive: f64,
    pub difference: f64,
    pub agree: bool,
    pub sup_norm: f64,
    pub l2_norm: f64,
}

pub const GOWERS_TOL: f64 = 1e-9;

pub fn gowers(a: &GowersArgs, seed: u64) -> Result<Outcome> {
    if a.n == 0 {
        bail!("--n must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = match a.seq {
        GowersSeq::Random => uniformity::random_seq(&mut rng, a.n),
        GowersSeq::Signs => uniformity::random_signs(&mut rng, a.n),
        GowersSeq::Ones => SeqFn::from_fn(a.n, |_| Complex64::new(1.0, 0.0)),
        GowersSeq::Character => {
            let n = a.n as i64;
            SeqFn::from_fn(a.n, |x| e((a.freq * x as i64).rem_euclid(n) as f64 / n as f64))
        }
    };
    let direct = gowers_direct(&f, a.l)?;
    let recursive = gowers_recursive(&f, a.l)?;
    let difference = (direct - recursive).abs();
    let r = GowersResult {
        direct,
        recursive,
        difference,
        agree: difference <= GOWERS_TOL,
        sup_norm: f.sup_norm(),
        l2_norm: f.lp_norm(2.0),
    };
    let bad = !r.agree;
    finish("gowers", seed, a, &r, None, bad)
}

// vdc

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug)]
#[serde(rename_all = "snake_case")]
pub enum VdcSeq {
    /// Coordinates uniform in the unit disc
    Random,
    Constant,
    /// (−1)^n in every coordinate
    Alternating,
    /// e((j+1)·n·(√5 − 2)) in coordinate j
    Rotation,
}

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct VdcArgs {
    /// Shift range K
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    /// Averaging window length
    #[arg(long, default_value_t = 1000)]
    pub window: usize,
    /// Window start (default K)
    #[arg(long)]
    pub start: Option<usize>,
    /// Vector dimension
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = VdcSeq::Random)]
    pub seq: VdcSeq,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VdcResult {
    pub length: usize,
    pub start: usize,
    pub report: VdcReport,
}

pub fn vdc(a: &VdcArgs, seed: u64) -> Result<Outcome> {
    if a.dim == 0 {
        bail!("--dim must be positive");
    }
    let start = a.start.unwrap_or(a.k);
    let len = start + a.window + a.k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = 5f64.sqrt() - 2.0;
    let u: Vec<Vec<Complex64>> = (0..len)
        .map(|n| match a.seq {
            VdcSeq::Random => uniformity::random_seq(&mut rng, a.dim).samples,
            VdcSeq::Constant => vec![Complex64::new(1.0 / (a.dim as f64).sqrt(), 0.0); a.dim],
            VdcSeq::Alternating => vec![Complex64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0); a.dim],
            VdcSeq::Rotation => (0..a.dim).map(|j| e(((j + 1) as f64 * n as f64 * phi).fract())).collect(),
        })
        .collect();
    let report = vdc_bound(&u, a.k, start, a.window)?;
    let bad = !report.pass;
    finish("vdc", seed, a, &VdcResult { length: len, start, report }, None, bad)
}

// vn

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// F(M) = 2M
    Double,
    /// F(M) = M + 1
    Succ,
}

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct VnArgs {
    #[arg(long, default_value_t = 0.2)]
    pub eps: f64,
    /// Maximum number of atoms of the random measure
    #[arg(long, default_value_t = 100)]
    pub atoms: usize,
    #[arg(long, value_enum, default_value_t = Growth::Double)]
    pub growth: Growth,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VnResult {
    pub atoms: usize,
    pub f_l2: f64,
    pub report: VnReport,
}

pub fn vn(a: &VnArgs, seed: u64) -> Result<Outcome> {
    if !(a.eps > 0.0 && a.eps < 1.0) {
        bail!("--eps must lie in (0, 1)");
    }
    if a.atoms == 0 {
        bail!("--atoms must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mu, f) = uniformity::random_measure(&mut rng, a.atoms);
    let f_l2 = mu.atoms.iter().zip(&f).map(|((_, w), c)| w * c.norm_sqr()).sum::<f64>().sqrt();
    let succ = |m: &BigUint| m + 1u32;
    let big_f: &dyn Fn(&BigUint) -> BigUint = match a.growth {
        Growth::Double => &doubling,
        Growth::Succ => &succ,
    };
    let report = vn_metastable(&mu, &f, a.eps, big_f)?;
    let bad = !report.verified;
    finish("vn", seed, a, &VnResult { atoms: mu.atoms.len(), f_l2, report }, None, bad)
}

// ww

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug)]
#[serde(rename_all = "snake_case")]
pub enum WwObs {
    /// e(y), orthogonal to the Kronecker factor
    Ey,
    /// e(x), an eigenfunction
    Ex,
    Zero,
}

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct WwArgs {
    #[arg(long, value_enum, default_value_t = WwObs::Ey)]
    pub f: WwObs,
    /// Character net resolution
    #[arg(long, default_value_t = 64)]
    pub net: usize,
    /// Ladder runs over N = 2^from, …, 2^to
    #[arg(long, default_value_t = 10)]
    pub from: u32,
    #[arg(long, default_value_t = 16)]
    pub to: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WwResult {
    pub system: String,
    pub alpha: f64,
    pub x0: Vec<f64>,
    pub ergodic: bool,
    pub weight_sobolev: f64,
    pub rows: Vec<SupRow>,
    pub strictly_decreasing: bool,
}

pub fn ww(a: &WwArgs, seed: u64) -> Result<Outcome> {
    if a.net == 0 || a.from > a.to || a.to > 24 {
        bail!("need --net ≥ 1 and --from ≤ --to ≤ 24");
    }
    use rand::Rng;
    let alpha = &equidist::named("r2") - &Scalar::one();
    let sys = ModelSystem::skew(alpha.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
    let f = match a.f {
        WwObs::Ey => ObsFn::character(vec![0, 1]),
        WwObs::Ex => ObsFn::character(vec![1, 0]),
        WwObs::Zero => ObsFn::zero(),
    };
    let family: Vec<NilWeight> = character_net(alpha.eval_f64(), a.net);
    let rows = ww_uniform_sup(&sys, &f, &x0, &family, &doubling_ladder(a.from, a.to))?;
    let strictly_decreasing = rows.windows(2).all(|w| w[1].sup < w[0].sup);
    let r = WwResult {
        system: "skew (x, y) -> (x + alpha, y + 2x + alpha)".into(),
        alpha: alpha.eval_f64(),
        x0,
        ergodic: sys.ergodic,
        weight_sobolev: family[0].sobolev(),
        rows,
        strictly_decreasing,
    };
    finish("ww", seed, a, &r, Some("rows"), false)
}

// bfko

#[derive(ValueEnum, Serialize, Deserialize, Clone, Copy, Debug)]
#[serde(rename_all = "snake_case")]
pub enum BfkoSeq {
    /// i.i.d. ±1
    Signs,
    /// e(n/3)
    Period3,
    Ones,
}

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct BfkoArgs {
    #[arg(long, value_enum, default_value_t = BfkoSeq::Signs)]
    pub seq: BfkoSeq,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 256)]
    pub l: usize,
    #[arg(long, default_value_t = 512)]
    pub r: usize,
    /// Largest lag
    #[arg(long, default_value_t = 10_000)]
    pub w: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BfkoResult {
    pub length: usize,
    pub report: BfkoReport,
}

pub fn bfko_sequence(seq: BfkoSeq, len: usize, seed: u64) -> Vec<Complex64> {
    match seq {
        BfkoSeq::Signs => uniformity::random_signs(&mut ChaCha8Rng::seed_from_u64(seed), len).samples,
        BfkoSeq::Period3 => (0..len).map(|n| e((n % 3) as f64 / 3.0)).collect(),
        BfkoSeq::Ones => vec![Complex64::new(1.0, 0.0); len],
    }
}

pub fn bfko(a: &BfkoArgs, seed: u64) -> Result<Outcome> {
    let len = a.r + a.w + 1;
    let c = bfko_sequence(a.seq, len, seed);
    let report = bfko_estimate(&c, a.delta, a.l, a.r, a.w)?;
    finish("bfko", seed, a, &BfkoResult { length: len, report }, None, false)
}

// validate

#[derive(Args, Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct ValidateArgs {
    /// JSON document written by a nilorbit subcommand
    pub file: PathBuf,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateResult {
    pub valid: bool,
    pub command: Option<String>,
    pub error: Option<String>,
}

/// Checks a document against the typed schema of the command that wrote it.
pub fn check_document(text: &str) -> Result<String> {
    let v: Value = serde_json::from_str(text)?;
    let cmd = v.get("command").and_then(Value::as_str).ok_or_else(|| anyhow!("missing \"command\""))?.to_string();
    match cmd.as_str() {
        "complexity" => roundtrip::<ComplexityArgs, ComplexityResult>(text),
        "orbit" => roundtrip::<OrbitArgs, OrbitResult>(text),
        "equidist" => roundtrip::<EquidistArgs, EquidistResult>(text),
        "gowers" => roundtrip::<GowersArgs, GowersResult>(text),
        "vdc" => roundtrip::<VdcArgs, VdcResult>(text),
        "vn" => roundtrip::<VnArgs, VnResult>(text),
        "ww" => roundtrip::<WwArgs, WwResult>(text),
        "bfko" => roundtrip::<BfkoArgs, BfkoResult>(text),
        "validate" => roundtrip::<ValidateArgs, ValidateResult>(text),
        other => bail!("unknown command {other:?}"),
    }?;
    Ok(cmd)
}

pub fn validate(a: &ValidateArgs, seed: u64) -> Result<Outcome> {
    let text = fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let r = match check_document(&text) {
        Ok(cmd) => ValidateResult { valid: true, command: Some(cmd), error: None },
        Err(e) => ValidateResult { valid: false, command: None, error: Some(format!("{e:#}")) },
    };
    let bad = !r.valid;
    finish("validate", seed, a, &r, None, bad)
}
