//! Named parameter families and the JSON operator description.
//!
//! Every preset is a closed form, so asymptotic conditions can be decided
//! symbolically.  Presets taking a constant `C` record the smallest `C` for
//! which all of their certificates close; the certificate search in
//! [`crate::criteria`] reproduces these constants.

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed::{int, rat, Poly, Seq, Term};
use crate::ctype::{C2Spec, CPlusSpec, CPlusVariant, CTypeError, CTypeOperator, Family, GenericSpec, ParamSeq};
use crate::scalar::ExactScalar;
use crate::vector::SpaceExponent;

/// Failures while turning a description into an operator.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("preset {0:?} does not take a constant C")]
    UnexpectedConstant(String),
    #[error("malformed operator description: {0}")]
    Malformed(String),
    #[error(transparent)]
    Geometry(#[from] CTypeError),
}

/// `c · 2^{C k}` as a closed form.
fn exp_ck(c: i64, big_c: u32) -> Seq {
    Seq::from_terms([Term::geometric(int(c), int(1 << big_c))])
}

/// `c · 2^{C k² + shift}`.
fn exp_ck2(c: i64, shift: i64, big_c: u32) -> Seq {
    Seq::pow2(int(c), &[shift, 0, big_c as i64])
}

fn closed(s: Seq) -> ParamSeq {
    ParamSeq::Closed(s)
}

/// `τ = 2^{Ck}`, `δ = 2·2^{Ck}`, `Δ = 10·2^{Ck}` (C₊,₁).
pub fn example55(big_c: u32) -> Family {
    Family::CPlus(CPlusSpec {
        variant: CPlusVariant::One,
        tau: closed(exp_ck(1, big_c)),
        delta: closed(exp_ck(2, big_c)),
        big_delta: closed(exp_ck(10, big_c)),
        b1: 1,
        tag: format!("tau = 2^({big_c}k), delta = 2^({big_c}k+1), Delta = 10*2^({big_c}k)"),
    })
}

/// `τ = 2^{Ck²}`, `δ = 2^{Ck²+1}`, `Δ = 2^{2Ck²+4}` (C₊,₂).
pub fn example59(big_c: u32) -> Family {
    Family::CPlus(CPlusSpec {
        variant: CPlusVariant::Two,
        tau: closed(exp_ck2(1, 0, big_c)),
        delta: closed(exp_ck2(1, 1, big_c)),
        big_delta: closed(Seq::pow2(int(1), &[4, 0, 2 * big_c as i64])),
        b1: 1,
        tag: format!("tau = 2^({big_c}k^2), delta = 2^({big_c}k^2+1), Delta = 2^({}k^2+4)", 2 * big_c),
    })
}

/// A desk-sized C₊,₂ family with `τ/δ = 1/2` and `δ/Δ → 0`:
/// `Δ^(k) = 64·14^{k−1}·2^{binom(k−1, 4)}`, `δ^(1) = 12`, `δ^(k) = 3Δ^(k−1)`, `τ = δ/2`.
pub fn example59_small() -> Family {
    // binom(k−1, 4) = (k⁴ − 10k³ + 35k² − 50k + 24)/24.
    let binom = Poly::new(vec![int(1), rat(-25, 12), rat(35, 24), rat(-5, 12), rat(1, 24)]);
    let big_delta = Seq::from_terms([Term::new(rat(32, 7), 0, int(14), binom)]);
    let delta = big_delta.shift(-1).expect("shift of a closed form").scale(&int(3)).with_override(1, int(12));
    let tau = delta.scale(&rat(1, 2)).with_override(1, int(6));
    Family::CPlus(CPlusSpec {
        variant: CPlusVariant::Two,
        tau: closed(tau),
        delta: closed(delta),
        big_delta: closed(big_delta),
        b1: 1,
        tag: "Delta = 64*14^(k-1)*2^binom(k-1,4), delta = 3*Delta^(k-1) (12 at k=1), tau = delta/2".into(),
    })
}

/// `Δ = 2^{2Ck²+5}`, `δ = 2^{Ck²+1}`, `τ = 2^{Ck²}`, `a_k = kδ^(k)`, `f_k = Δ^(k)/2` (C₂).
pub fn c2mix(big_c: u32) -> Family {
    let delta = exp_ck2(1, 1, big_c);
    let big_delta = Seq::pow2(int(1), &[5, 0, 2 * big_c as i64]);
    Family::C2(C2Spec {
        a: closed(Seq::k().mul(&delta)),
        f: closed(big_delta.scale(&rat(1, 2))),
        tau: closed(exp_ck2(1, 0, big_c)),
        delta: closed(delta),
        big_delta: closed(big_delta),
        b1: 1,
        tag: format!("Delta = 2^({}k^2+5), delta = 2^({big_c}k^2+1), tau = 2^({big_c}k^2), a = k*delta, f = Delta/2", 2 * big_c),
    })
}

/// `δ = 2k`, `τ = k`, `Δ = 2^{k+1}`, `b_1 = 1` (C₊,₁).
pub fn thsmx() -> Family {
    Family::CPlus(CPlusSpec {
        variant: CPlusVariant::One,
        tau: closed(Seq::k()),
        delta: closed(Seq::poly(&[int(0), int(2)])),
        big_delta: closed(Seq::from_terms([Term::geometric(int(2), int(2))])),
        b1: 1,
        tag: "tau = k, delta = 2k, Delta = 2^(k+1)".into(),
    })
}

/// A desk-sized C₊,₁ family with `δ/Δ = 1/2`: `Δ = 32·34^{k−1}`, `δ = Δ/2`, `τ = Δ/8`.
pub fn fhc_small() -> Family {
    let big_delta = Seq::from_terms([Term::geometric(rat(16, 17), int(34))]);
    Family::CPlus(CPlusSpec {
        variant: CPlusVariant::One,
        tau: closed(big_delta.scale(&rat(1, 8))),
        delta: closed(big_delta.scale(&rat(1, 2))),
        big_delta: closed(big_delta),
        b1: 1,
        tag: "Delta = 32*34^(k-1), delta = Delta/2, tau = Delta/8".into(),
    })
}

/// A registry entry.
#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    /// Recorded minimal `C` closing the preset's certificates (for presets
    /// parameterized by `C`).
    pub minimal_c: Option<u32>,
    /// Fixed `C` of a desk-sized instance, if any.
    pub fixed_c: Option<u32>,
    build: fn(u32) -> Family,
}

impl Preset {
    /// The family at constant `c` (ignored by presets without a constant).
    pub fn family(&self, c: Option<u32>) -> Family {
        (self.build)(c.or(self.fixed_c).or(self.minimal_c).unwrap_or(1))
    }

    pub fn takes_constant(&self) -> bool {
        self.minimal_c.is_some()
    }
}

/// Minimal `C` for the example55 certificate chain.
pub const EXAMPLE55_MIN_C: u32 = 5;
/// Minimal `C` for the example59 certificate chain.
pub const EXAMPLE59_MIN_C: u32 = 3;
/// Minimal `C` for the c2mix certificate chain.
pub const C2MIX_MIN_C: u32 = 6;

static PRESETS: &[Preset] = &[
    Preset {
        name: "example55",
        summary: "C+,1: tau = 2^(Ck), delta = 2*2^(Ck), Delta = 10*2^(Ck); frequently hypercyclic, not mixing, c(T) <= 9/10",
        minimal_c: Some(EXAMPLE55_MIN_C),
        fixed_c: None,
        build: example55,
    },
    Preset {
        name: "example55-small",
        summary: "example55 with C = 4 (desk-sized blocks)",
        minimal_c: None,
        fixed_c: Some(4),
        build: example55,
    },
    Preset {
        name: "example59",
        summary: "C+,2: tau = 2^(Ck^2), delta = 2^(Ck^2+1), Delta = 2^(2Ck^2+4); U-frequently but not frequently hypercyclic",
        minimal_c: Some(EXAMPLE59_MIN_C),
        fixed_c: None,
        build: example59,
    },
    Preset {
        name: "example59-small",
        summary: "C+,2 with Delta = 64*14^(k-1)*2^binom(k-1,4), delta = 3*Delta^(k-1), tau = delta/2 (desk-sized)",
        minimal_c: None,
        fixed_c: None,
        build: |_| example59_small(),
    },
    Preset {
        name: "c2mix",
        summary:
            "C2: Delta = 2^(2Ck^2+5), delta = 2^(Ck^2+1), tau = 2^(Ck^2), a = k*delta, f = Delta/2; mixing, not U-frequently hypercyclic",
        minimal_c: Some(C2MIX_MIN_C),
        fixed_c: None,
        build: c2mix,
    },
    Preset { name: "c2mix-small", summary: "c2mix with C = 1", minimal_c: None, fixed_c: Some(1), build: c2mix },
    Preset {
        name: "thsmx",
        summary: "C+,1: delta = 2k, tau = k, Delta = 2^(k+1), b1 = 1; rich unimodular eigenvector fields",
        minimal_c: None,
        fixed_c: None,
        build: |_| thsmx(),
    },
    Preset {
        name: "fhc-small",
        summary: "C+,1: Delta = 32*34^(k-1), delta = Delta/2, tau = Delta/8 (desk-sized, delta/Delta = 1/2)",
        minimal_c: None,
        fixed_c: None,
        build: |_| fhc_small(),
    },
];

pub fn presets() -> &'static [Preset] {
    PRESETS
}

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Largest horizon `N ≤ cap` whose geometry fits in 64-bit indices.
pub fn fit_horizon(family: &Family, cap: u64) -> u64 {
    let mut n = cap;
    loop {
        if CTypeOperator::new(family.clone(), n, SpaceExponent::L2).is_ok() || n == 0 {
            return n;
        }
        n /= 2;
    }
}

/// Last block index of the generations a tabulated family defines, or `None`
/// for closed forms.
fn table_blocks(family: &Family) -> Option<u64> {
    let (tau, delta, big_delta) = family.generation_params()?;
    let mut len = [tau, delta, big_delta].iter().filter_map(|p| p.defined_len()).min()?;
    let mut first = BigInt::from(1);
    let mut k = 1u64;
    if let Family::C2(s) = family {
        len = [&s.a, &s.f].iter().filter_map(|p| p.defined_len()).fold(len, u64::min);
        while k <= len {
            let spread = s.f.at(k)? - s.a.at(k)?;
            first += &spread * &first;
            k += 1;
        }
    } else {
        first = BigInt::from(1) << len as usize;
    }
    Some(u64::try_from(first - 1).unwrap_or(u64::MAX))
}

/// An integer given either as a JSON number or a decimal string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntValue {
    Num(i64),
    Text(String),
}

impl IntValue {
    fn to_big(&self) -> Result<BigInt, SpecError> {
        match self {
            IntValue::Num(n) => Ok(BigInt::from(*n)),
            IntValue::Text(s) => s.trim().parse().map_err(|_| SpecError::Malformed(format!("not an integer: {s:?}"))),
        }
    }

    fn to_u64(&self) -> Result<u64, SpecError> {
        u64::try_from(self.to_big()?).map_err(|_| SpecError::Malformed("index out of range".into()))
    }

    fn to_scalar(&self) -> Result<ExactScalar, SpecError> {
        match self {
            IntValue::Num(n) => Ok(ExactScalar::from_int(*n)),
            IntValue::Text(s) => ExactScalar::parse(s).map_err(|e| SpecError::Malformed(e.to_string())),
        }
    }
}

/// Explicit finite parameter tables.
///
/// Generation-indexed lists start at `k = 1`.  The only extension rule is
/// `"none"`: values beyond the table are undefined and never extrapolated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tables {
    #[serde(default)]
    pub tau: Vec<IntValue>,
    #[serde(default)]
    pub delta: Vec<IntValue>,
    #[serde(default, rename = "Delta")]
    pub big_delta: Vec<IntValue>,
    #[serde(default)]
    pub a: Vec<IntValue>,
    #[serde(default)]
    pub f: Vec<IntValue>,
    /// Generic families: block boundaries, φ, couplings and weights.
    #[serde(default)]
    pub b: Vec<IntValue>,
    #[serde(default)]
    pub phi: Vec<IntValue>,
    #[serde(default)]
    pub v: Vec<IntValue>,
    #[serde(default)]
    pub w: Vec<IntValue>,
    #[serde(default)]
    pub extension: Option<String>,
}

/// The JSON form of an operator description.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpecJson {
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub tables: Option<Tables>,
    #[serde(default, rename = "C")]
    pub c: Option<u32>,
    #[serde(default)]
    pub p: Option<u32>,
    #[serde(default, rename = "N_max")]
    pub n_max: Option<u64>,
    #[serde(default)]
    pub b1: Option<u64>,
}

/// A fully resolved description.
#[derive(Debug, Clone)]
pub struct ResolvedSpec {
    pub label: String,
    pub family: Family,
    pub c: Option<u32>,
    pub p: SpaceExponent,
    pub n_max: u64,
}

impl ResolvedSpec {
    pub fn operator(&self) -> Result<CTypeOperator, CTypeError> {
        CTypeOperator::new(self.family.clone(), self.n_max, self.p)
    }
}

fn big_list(v: &[IntValue]) -> Result<ParamSeq, SpecError> {
    Ok(ParamSeq::Table(v.iter().map(IntValue::to_big).collect::<Result<_, _>>()?))
}

fn set_b1(family: &mut Family, b1: u64) {
    match family {
        Family::CPlus(s) => s.b1 = b1,
        Family::C2(s) => s.b1 = b1,
        Family::Generic(_) => {}
    }
}

/// Default horizon cap for presets.
pub const DEFAULT_HORIZON_CAP: u64 = 31;

impl OperatorSpecJson {
    pub fn from_preset(name: &str) -> Self {
        OperatorSpecJson { preset: Some(name.into()), ..Default::default() }
    }

    pub fn resolve(&self) -> Result<ResolvedSpec, SpecError> {
        let p = SpaceExponent(self.p.unwrap_or(2));
        let (label, mut family, c) = match (&self.preset, &self.tables) {
            (Some(name), _) => {
                let pr = preset(name).ok_or_else(|| SpecError::UnknownPreset(name.clone()))?;
                if self.c.is_some() && !pr.takes_constant() {
                    return Err(SpecError::UnexpectedConstant(name.clone()));
                }
                let c = if pr.takes_constant() { self.c.or(pr.minimal_c) } else { pr.fixed_c };
                (name.clone(), pr.family(c), c)
            }
            (None, Some(t)) => {
                if let Some(ext) = &t.extension {
                    if ext != "none" {
                        return Err(SpecError::Malformed(format!("unsupported extension rule {ext:?}")));
                    }
                }
                let fam_name = self.family.as_deref().unwrap_or("generic");
                let b1 = self.b1.unwrap_or(1);
                let family = match fam_name {
                    "cplus1" | "cplus2" => Family::CPlus(CPlusSpec {
                        variant: if fam_name == "cplus1" { CPlusVariant::One } else { CPlusVariant::Two },
                        tau: big_list(&t.tau)?,
                        delta: big_list(&t.delta)?,
                        big_delta: big_list(&t.big_delta)?,
                        b1,
                        tag: "table".into(),
                    }),
                    "c2" => Family::C2(C2Spec {
                        a: big_list(&t.a)?,
                        f: big_list(&t.f)?,
                        tau: big_list(&t.tau)?,
                        delta: big_list(&t.delta)?,
                        big_delta: big_list(&t.big_delta)?,
                        b1,
                        tag: "table".into(),
                    }),
                    "generic" => Family::Generic(GenericSpec {
                        b: t.b.iter().map(IntValue::to_u64).collect::<Result<_, _>>()?,
                        phi: t.phi.iter().map(IntValue::to_u64).collect::<Result<_, _>>()?,
                        v: t.v.iter().map(IntValue::to_scalar).collect::<Result<_, _>>()?,
                        w: t.w.iter().map(IntValue::to_scalar).collect::<Result<_, _>>()?,
                    }),
                    other => return Err(SpecError::UnknownFamily(other.into())),
                };
                (format!("{fam_name}-table"), family, None)
            }
            (None, None) => return Err(SpecError::Malformed("either \"preset\" or \"tables\" is required".into())),
        };
        if let (Some(want), Some(_)) = (&self.family, &self.preset) {
            if want != family.name() {
                return Err(SpecError::Malformed(format!("preset {label:?} is of family {}, not {want}", family.name())));
            }
        }
        if let Some(b1) = self.b1 {
            set_b1(&mut family, b1);
        }
        let n_max = match (self.n_max, &family) {
            (Some(n), _) => n,
            (None, Family::Generic(g)) => g.b.len().saturating_sub(2) as u64,
            (None, _) => match table_blocks(&family) {
                // Tables: cover every tabulated generation so validation sees
                // all of them (shrinking to a buildable prefix would hide
                // violations).
                Some(n) => n.min(DEFAULT_HORIZON_CAP),
                None => fit_horizon(&family, DEFAULT_HORIZON_CAP),
            },
        };
        Ok(ResolvedSpec { label, family, c, p, n_max })
    }
}
