//! Parametric bivariate copulas.
//!
//! Conventions: `h1(u, v) = P(U <= u | V = v) = dC/dv` and
//! `h2(u, v) = P(V <= v | U = u) = dC/du`. All base families are
//! exchangeable, so `h2` of a base family is `h1` with swapped arguments;
//! rotations are expressed through the base functions.
//!
//! Rotations follow the usual vine-software convention: the 90 degree
//! rotation has density `c(1 - u, v)`, 180 has `c(1 - u, 1 - v)` and 270
//! has `c(u, 1 - v)`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // unused when std is linked and inherent f64 methods win
use num_traits::Float;
use once_cell::race::OnceBox;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{brent_minimize, debye1, ln_gamma, norm_cdf, norm_pdf, norm_quantile, StudentT};
use crate::rng::RandomStream;
use crate::stats::kendall_tau;

/// Inputs are clamped to `[EPS, 1 - EPS]` before any evaluation.
pub const CLAMP_EPS: f64 = 1e-10;

/// Degrees-of-freedom grid searched when fitting the Student-t copula.
pub const T_DOF_GRID: [f64; 8] = [2.5, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 30.0];

const RHO_MAX: f64 = 0.999;
const CLAYTON_RANGE: (f64, f64) = (1e-4, 28.0);
const GUMBEL_RANGE: (f64, f64) = (1.0, 17.0);
const FRANK_MAX: f64 = 35.0;
const FIT_XTOL: f64 = 1e-4;

#[inline]
fn clamp(u: f64) -> f64 {
    if u.is_nan() {
        return 0.5;
    }
    u.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
    Frank,
}

impl FamilyTag {
    pub fn n_parameters(self) -> usize {
        match self {
            FamilyTag::Independence => 0,
            FamilyTag::StudentT => 2,
            _ => 1,
        }
    }

    pub fn allows_rotation(self) -> bool {
        matches!(self, FamilyTag::Clayton | FamilyTag::Gumbel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u16", into = "u16")]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// Rotation of the copula of `(V, U)` when `self` is the rotation of `(U, V)`.
    pub fn swapped(self) -> Rotation {
        match self {
            Rotation::R90 => Rotation::R270,
            Rotation::R270 => Rotation::R90,
            r => r,
        }
    }

    // image of (u, v) under the rotation, as fed to the base density
    #[inline]
    fn map(self, u: f64, v: f64) -> (f64, f64) {
        match self {
            Rotation::R0 => (u, v),
            Rotation::R90 => (1.0 - u, v),
            Rotation::R180 => (1.0 - u, 1.0 - v),
            Rotation::R270 => (u, 1.0 - v),
        }
    }
}

impl TryFrom<u16> for Rotation {
    type Error = Error;

    fn try_from(d: u16) -> Result<Self> {
        match d {
            0 => Ok(Rotation::R0),
            90 => Ok(Rotation::R90),
            180 => Ok(Rotation::R180),
            270 => Ok(Rotation::R270),
            _ => Err(Error::domain(format!("rotation must be 0, 90, 180 or 270, got {d}"))),
        }
    }
}

impl From<Rotation> for u16 {
    fn from(r: Rotation) -> u16 {
        r.degrees()
    }
}

/// Family tag plus rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr", into = "FamilyRepr")]
pub struct CopulaFamily {
    tag: FamilyTag,
    rotation: Rotation,
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    family: FamilyTag,
    rotation: Rotation,
}

impl TryFrom<FamilyRepr> for CopulaFamily {
    type Error = Error;

    fn try_from(r: FamilyRepr) -> Result<Self> {
        CopulaFamily::new(r.family, r.rotation)
    }
}

impl From<CopulaFamily> for FamilyRepr {
    fn from(f: CopulaFamily) -> Self {
        FamilyRepr {
            family: f.tag,
            rotation: f.rotation,
        }
    }
}

impl CopulaFamily {
    pub fn new(tag: FamilyTag, rotation: Rotation) -> Result<Self> {
        if rotation != Rotation::R0 && !tag.allows_rotation() {
            return Err(Error::domain(format!(
                "{tag:?} does not take a rotation (got {} degrees)",
                rotation.degrees()
            )));
        }
        Ok(Self { tag, rotation })
    }

    pub const fn unrotated(tag: FamilyTag) -> Self {
        Self {
            tag,
            rotation: Rotation::R0,
        }
    }

    pub fn tag(self) -> FamilyTag {
        self.tag
    }

    pub fn rotation(self) -> Rotation {
        self.rotation
    }

    pub fn n_parameters(self) -> usize {
        self.tag.n_parameters()
    }

    /// Short label such as `Clayton180`.
    pub fn label(self) -> String {
        match self.rotation {
            Rotation::R0 => format!("{:?}", self.tag),
            r => format!("{:?}{}", self.tag, r.degrees()),
        }
    }

    /// The default selection catalog.
    pub fn default_catalog() -> Vec<CopulaFamily> {
        vec![
            Self::unrotated(FamilyTag::Independence),
            Self::unrotated(FamilyTag::Gaussian),
            Self::unrotated(FamilyTag::StudentT),
            Self::unrotated(FamilyTag::Clayton),
            Self {
                tag: FamilyTag::Clayton,
                rotation: Rotation::R180,
            },
            Self::unrotated(FamilyTag::Gumbel),
            Self {
                tag: FamilyTag::Gumbel,
                rotation: Rotation::R180,
            },
            Self::unrotated(FamilyTag::Frank),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Base {
    Independence,
    Gaussian {
        rho: f64,
        s: f64,
    },
    StudentT {
        rho: f64,
        nu: f64,
        s: f64,
        t_nu: TDist,
        t_nu1: TDist,
        ln_const: f64,
    },
    Clayton {
        theta: f64,
    },
    Gumbel {
        theta: f64,
    },
    Frank {
        theta: f64,
        em1: f64,
    },
}

/// A pair-copula: family, rotation and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CopulaRepr", into = "CopulaRepr")]
pub struct BivariateCopula {
    base: Base,
    rotation: Rotation,
}

#[derive(Serialize, Deserialize)]
struct CopulaRepr {
    family: FamilyTag,
    rotation: Rotation,
    parameters: Vec<f64>,
}

impl TryFrom<CopulaRepr> for BivariateCopula {
    type Error = Error;

    fn try_from(r: CopulaRepr) -> Result<Self> {
        BivariateCopula::new(CopulaFamily::new(r.family, r.rotation)?, &r.parameters)
    }
}

impl From<BivariateCopula> for CopulaRepr {
    fn from(c: BivariateCopula) -> Self {
        CopulaRepr {
            family: c.family().tag,
            rotation: c.rotation,
            parameters: c.parameters(),
        }
    }
}

impl BivariateCopula {
    pub fn new(family: CopulaFamily, params: &[f64]) -> Result<Self> {
        let CopulaFamily { tag, rotation } = CopulaFamily::new(family.tag, family.rotation)?;
        if params.len() != tag.n_parameters() {
            return Err(Error::domain(format!(
                "{tag:?} takes {} parameter(s), got {}",
                tag.n_parameters(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("copula parameters must be finite"));
        }
        let base = match tag {
            FamilyTag::Independence => Base::Independence,
            FamilyTag::Gaussian => gaussian_base(params[0])?,
            FamilyTag::StudentT => student_base(params[0], params[1])?,
            FamilyTag::Clayton => {
                if !(params[0] > 0.0) {
                    return Err(Error::domain(format!("Clayton needs theta > 0, got {}", params[0])));
                }
                Base::Clayton { theta: params[0] }
            }
            FamilyTag::Gumbel => {
                if !(params[0] >= 1.0) {
                    return Err(Error::domain(format!("Gumbel needs theta >= 1, got {}", params[0])));
                }
                Base::Gumbel { theta: params[0] }
            }
            FamilyTag::Frank => {
                if params[0] == 0.0 {
                    return Err(Error::domain("Frank needs theta != 0"));
                }
                Base::Frank {
                    theta: params[0],
                    em1: (-params[0]).exp_m1(),
                }
            }
        };
        Ok(Self { base, rotation })
    }

    pub fn independence() -> Self {
        Self {
            base: Base::Independence,
            rotation: Rotation::R0,
        }
    }

    pub fn gaussian(rho: f64) -> Result<Self> {
        Self::new(CopulaFamily::unrotated(FamilyTag::Gaussian), &[rho])
    }

    pub fn student_t(rho: f64, nu: f64) -> Result<Self> {
        Self::new(CopulaFamily::unrotated(FamilyTag::StudentT), &[rho, nu])
    }

    pub fn clayton(theta: f64, rotation: Rotation) -> Result<Self> {
        Self::new(CopulaFamily::new(FamilyTag::Clayton, rotation)?, &[theta])
    }

    pub fn gumbel(theta: f64, rotation: Rotation) -> Result<Self> {
        Self::new(CopulaFamily::new(FamilyTag::Gumbel, rotation)?, &[theta])
    }

    pub fn frank(theta: f64) -> Result<Self> {
        Self::new(CopulaFamily::unrotated(FamilyTag::Frank), &[theta])
    }

    pub fn family(&self) -> CopulaFamily {
        let tag = match self.base {
            Base::Independence => FamilyTag::Independence,
            Base::Gaussian { .. } => FamilyTag::Gaussian,
            Base::StudentT { .. } => FamilyTag::StudentT,
            Base::Clayton { .. } => FamilyTag::Clayton,
            Base::Gumbel { .. } => FamilyTag::Gumbel,
            Base::Frank { .. } => FamilyTag::Frank,
        };
        CopulaFamily {
            tag,
            rotation: self.rotation,
        }
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn parameters(&self) -> Vec<f64> {
        match self.base {
            Base::Independence => Vec::new(),
            Base::Gaussian { rho, .. } => vec![rho],
            Base::StudentT { rho, nu, .. } => vec![rho, nu],
            Base::Clayton { theta } | Base::Gumbel { theta } | Base::Frank { theta, .. } => {
                vec![theta]
            }
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.family().n_parameters()
    }

    pub fn is_independence(&self) -> bool {
        matches!(self.base, Base::Independence)
    }

    /// The copula of `(V, U)`.
    pub fn swapped(&self) -> Self {
        Self {
            base: self.base,
            rotation: self.rotation.swapped(),
        }
    }

    /// Population Kendall's tau implied by the parameters.
    pub fn kendall_tau(&self) -> f64 {
        let base = match self.base {
            Base::Independence => 0.0,
            Base::Gaussian { rho, .. } | Base::StudentT { rho, .. } => 2.0 / PI * rho.asin(),
            Base::Clayton { theta } => theta / (theta + 2.0),
            Base::Gumbel { theta } => 1.0 - 1.0 / theta,
            Base::Frank { theta, .. } => frank_tau(theta),
        };
        match self.rotation {
            Rotation::R90 | Rotation::R270 => -base,
            _ => base,
        }
    }

    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        check_unit(u, "u")?;
        check_unit(v, "v")?;
        Ok(self.ln_pdf(u, v).exp())
    }

    /// `P(U <= u | V = v)`.
    pub fn h_function(&self, u: f64, given_v: f64) -> Result<f64> {
        check_unit(u, "u")?;
        check_unit(given_v, "given_v")?;
        Ok(self.h1(u, given_v))
    }

    /// Inverse of `h_function` in its first argument.
    pub fn h_inverse(&self, w: f64, given_v: f64) -> Result<f64> {
        check_unit(w, "w")?;
        check_unit(given_v, "given_v")?;
        let (u, ok) = self.h1_inverse_checked(w, given_v);
        if ok {
            Ok(u)
        } else {
            Err(Error::numeric(format!(
                "h-inverse did not converge for {} at w={w}, v={given_v}",
                self.family().label()
            )))
        }
    }

    /// Log-density; inputs are clamped into the open unit square.
    pub fn ln_pdf(&self, u: f64, v: f64) -> f64 {
        let (a, b) = self.rotation.map(clamp(u), clamp(v));
        base_ln_pdf(&self.base, clamp(a), clamp(b))
    }

    /// `P(U <= u | V = v)`, clamped.
    #[inline]
    pub fn h1(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp(u), clamp(v));
        let b = &self.base;
        let out = match self.rotation {
            Rotation::R0 => base_h(b, u, v),
            Rotation::R90 => 1.0 - base_h(b, 1.0 - u, v),
            Rotation::R180 => 1.0 - base_h(b, 1.0 - u, 1.0 - v),
            Rotation::R270 => base_h(b, u, 1.0 - v),
        };
        clamp(out)
    }

    /// `P(V <= v | U = u)`, clamped.
    #[inline]
    pub fn h2(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp(u), clamp(v));
        let b = &self.base;
        let out = match self.rotation {
            Rotation::R0 => base_h(b, v, u),
            Rotation::R90 => base_h(b, v, 1.0 - u),
            Rotation::R180 => 1.0 - base_h(b, 1.0 - v, 1.0 - u),
            Rotation::R270 => 1.0 - base_h(b, 1.0 - v, u),
        };
        clamp(out)
    }

    /// Solves `h1(u, v) = w` for `u`.
    #[inline]
    pub fn h1_inverse(&self, w: f64, v: f64) -> f64 {
        self.h1_inverse_checked(w, v).0
    }

    /// Solves `h2(u, v) = w` for `v`.
    #[inline]
    pub fn h2_inverse(&self, w: f64, u: f64) -> f64 {
        let (w, u) = (clamp(w), clamp(u));
        let b = &self.base;
        let out = match self.rotation {
            Rotation::R0 => base_hinv(b, w, u).0,
            Rotation::R90 => base_hinv(b, w, 1.0 - u).0,
            Rotation::R180 => 1.0 - base_hinv(b, 1.0 - w, 1.0 - u).0,
            Rotation::R270 => 1.0 - base_hinv(b, 1.0 - w, u).0,
        };
        clamp(out)
    }

    fn h1_inverse_checked(&self, w: f64, v: f64) -> (f64, bool) {
        let (w, v) = (clamp(w), clamp(v));
        let b = &self.base;
        let (out, ok) = match self.rotation {
            Rotation::R0 => base_hinv(b, w, v),
            Rotation::R90 => {
                let (x, ok) = base_hinv(b, 1.0 - w, v);
                (1.0 - x, ok)
            }
            Rotation::R180 => {
                let (x, ok) = base_hinv(b, 1.0 - w, 1.0 - v);
                (1.0 - x, ok)
            }
            Rotation::R270 => base_hinv(b, w, 1.0 - v),
        };
        (clamp(out), ok)
    }

    /// Draws `n` pairs: `v` uniform, `u = h_inverse(w | v)` with `w` uniform.
    pub fn sample_pair(&self, rng: &mut RandomStream, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| {
                let v = rng.uniform();
                let w = rng.uniform();
                (self.h1_inverse(w, v), v)
            })
            .collect()
    }
}

fn check_unit(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must lie in (0, 1), got {x}")))
    }
}

fn gaussian_base(rho: f64) -> Result<Base> {
    if !(rho.abs() < 1.0) {
        return Err(Error::domain(format!("correlation must lie in (-1, 1), got {rho}")));
    }
    Ok(Base::Gaussian {
        rho,
        s: (1.0 - rho * rho).sqrt(),
    })
}

fn student_base(rho: f64, nu: f64) -> Result<Base> {
    if !(rho.abs() < 1.0) {
        return Err(Error::domain(format!("correlation must lie in (-1, 1), got {rho}")));
    }
    if !(nu > 2.0) || !nu.is_finite() {
        return Err(Error::domain(format!("Student-t copula needs dof > 2, got {nu}")));
    }
    Ok(Base::StudentT {
        rho,
        nu,
        s: (1.0 - rho * rho).sqrt(),
        t_nu: TDist::new(nu),
        t_nu1: TDist::new(nu + 1.0),
        ln_const: student_ln_const(nu),
    })
}

// ln Gamma((nu+2)/2) + ln Gamma(nu/2) - 2 ln Gamma((nu+1)/2)
fn student_ln_const(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0))
}

fn base_ln_pdf(b: &Base, u: f64, v: f64) -> f64 {
    match *b {
        Base::Independence => 0.0,
        Base::Gaussian { rho, .. } => {
            gaussian_ln_pdf(rho, norm_quantile(u), norm_quantile(v))
        }
        Base::StudentT {
            rho,
            nu,
            t_nu,
            ln_const,
            ..
        } => {
            let x = t_nu.quantile(u);
            let y = t_nu.quantile(v);
            student_ln_pdf(rho, nu, ln_const, x, y)
        }
        Base::Clayton { theta } => clayton_ln_pdf(theta, u.ln(), v.ln()),
        Base::Gumbel { theta } => {
            let (lu, lv) = (u.ln(), v.ln());
            gumbel_ln_pdf(theta, lu, lv, (-lu).ln(), (-lv).ln())
        }
        Base::Frank { theta, em1 } => frank_ln_pdf(theta, em1, u, v),
    }
}

#[inline]
fn gaussian_ln_pdf(rho: f64, x: f64, y: f64) -> f64 {
    let r2 = rho * rho;
    -0.5 * (1.0 - r2).ln() - (r2 * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * (1.0 - r2))
}

#[inline]
fn student_ln_pdf(rho: f64, nu: f64, ln_const: f64, x: f64, y: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    ln_const - 0.5 * r2.ln()
        - 0.5 * (nu + 2.0) * ((x * x + y * y - 2.0 * rho * x * y) / (nu * r2)).ln_1p()
        + 0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

#[inline]
fn clayton_ln_pdf(theta: f64, lu: f64, lv: f64) -> f64 {
    // u^-theta + v^-theta - 1 = 1 + expm1(-theta lu) + expm1(-theta lv)
    let s = ((-theta * lu).exp_m1() + (-theta * lv).exp_m1()).ln_1p();
    theta.ln_1p() - (1.0 + theta) * (lu + lv) - (2.0 + 1.0 / theta) * s
}

#[inline]
fn gumbel_ln_pdf(theta: f64, lu: f64, lv: f64, llu: f64, llv: f64) -> f64 {
    let a = (theta * llu).exp();
    let b = (theta * llv).exp();
    let ls = (a + b).ln();
    let big_a = (ls / theta).exp();
    -big_a - lu - lv + (theta - 1.0) * (llu + llv) + (1.0 / theta - 2.0) * ls
        + (big_a + theta - 1.0).ln()
}

#[inline]
fn frank_ln_pdf(theta: f64, em1: f64, u: f64, v: f64) -> f64 {
    let d = -em1 - (-theta * u).exp_m1() * (-theta * v).exp_m1();
    (theta * -em1).ln() - theta * (u + v) - 2.0 * d.abs().ln()
}

// P(U <= u | V = v) for the unrotated family
#[inline]
fn base_h(b: &Base, u: f64, v: f64) -> f64 {
    match *b {
        Base::Independence => u,
        Base::Gaussian { rho, s } => norm_cdf((norm_quantile(u) - rho * norm_quantile(v)) / s),
        Base::StudentT {
            rho,
            nu,
            s,
            t_nu,
            t_nu1,
            ..
        } => {
            let x = t_nu.quantile(u);
            let y = t_nu.quantile(v);
            let scale = ((nu + y * y) / (nu + 1.0)).sqrt() * s;
            t_nu1.cdf((x - rho * y) / scale)
        }
        Base::Clayton { theta } => {
            let (lu, lv) = (u.ln(), v.ln());
            let s = ((-theta * lu).exp_m1() + (-theta * lv).exp_m1()).ln_1p();
            (-(theta + 1.0) * lv - (1.0 + 1.0 / theta) * s).exp()
        }
        Base::Gumbel { theta } => {
            let (lu, lv) = (u.ln(), v.ln());
            let nlv = -lv;
            let a = (-lu).powf(theta);
            let ls = (a + nlv.powf(theta)).ln();
            let big_a = (ls / theta).exp();
            (-big_a + (1.0 / theta - 1.0) * ls + (theta - 1.0) * nlv.ln() - lv).exp()
        }
        Base::Frank { theta, em1 } => {
            let a = (-theta * u).exp_m1();
            let bb = (-theta * v).exp_m1();
            (-theta * v).exp() * a / (em1 + a * bb)
        }
    }
}

// inverse of base_h in u; the flag is false if an iterative solve failed
#[inline]
fn base_hinv(b: &Base, w: f64, v: f64) -> (f64, bool) {
    match *b {
        Base::Independence => (w, true),
        Base::Gaussian { rho, s } => {
            (norm_cdf(norm_quantile(w) * s + rho * norm_quantile(v)), true)
        }
        Base::StudentT {
            rho,
            nu,
            s,
            t_nu,
            t_nu1,
            ..
        } => {
            let y = t_nu.quantile(v);
            let scale = ((nu + y * y) / (nu + 1.0)).sqrt() * s;
            (t_nu.cdf(t_nu1.quantile(w) * scale + rho * y), true)
        }
        Base::Clayton { theta } => {
            // u^-theta = 1 + v^-theta (w^(-theta/(1+theta)) - 1)
            let lv = v.ln();
            let inner = (-theta * lv).exp() * (-theta / (1.0 + theta) * w.ln()).exp_m1();
            ((-inner.ln_1p() / theta).exp(), true)
        }
        Base::Gumbel { theta } => gumbel_hinv(theta, w, v),
        Base::Frank { theta, em1 } => {
            let a = w * em1 / ((1.0 - w) * (-theta * v).exp() + w);
            (-a.ln_1p() / theta, true)
        }
    }
}

// With x = -ln v and A = ((-ln u)^theta + x^theta)^(1/theta), h(u|v) = w is
// A + (theta - 1) ln A = x + (theta - 1) ln x - ln w. In b = ln A the left side
// e^b + (theta - 1) b is convex and increasing, so Newton lands right of the
// root after at most one step and then decreases monotonically.
fn gumbel_hinv(theta: f64, w: f64, v: f64) -> (f64, bool) {
    let x = -v.ln();
    if theta == 1.0 {
        return (w, true);
    }
    let k = theta - 1.0;
    let target = x + k * x.ln() - w.ln();
    let mut b = x.ln();
    let mut converged = false;
    for _ in 0..100 {
        let eb = b.exp();
        let step = -(eb + k * b - target) / (eb + k);
        b += step;
        if step.abs() <= 1e-14 * b.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    let a = b.exp().max(x);
    // (-ln u)^theta = A^theta - x^theta
    let at = (theta * a.ln()).exp();
    let xt = (theta * x.ln()).exp();
    let d = (at - xt).max(0.0);
    let u = (-(d.ln() / theta).exp()).exp();
    (u, converged)
}

fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-8 {
        return 0.0;
    }
    1.0 - 4.0 / theta * (1.0 - debye1(theta))
}

fn frank_theta_from_tau(tau: f64) -> f64 {
    if tau.abs() < 1e-6 {
        return if tau < 0.0 { -1e-4 } else { 1e-4 };
    }
    let (mut lo, mut hi) = if tau > 0.0 { (1e-8, FRANK_MAX) } else { (-FRANK_MAX, -1e-8) };
    if tau >= frank_tau(FRANK_MAX) {
        return FRANK_MAX;
    }
    if tau <= frank_tau(-FRANK_MAX) {
        return -FRANK_MAX;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if frank_tau(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Information criterion for family selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SelectionCriterion {
    #[default]
    Aic,
    Bic,
}

impl SelectionCriterion {
    pub fn penalty(self, n_params: usize, n_obs: usize) -> f64 {
        match self {
            SelectionCriterion::Aic => 2.0 * n_params as f64,
            SelectionCriterion::Bic => (n_obs as f64).ln() * n_params as f64,
        }
    }
}

/// Pseudo-observations of one pair with lazily computed transforms shared by
/// the family fitters.
pub struct PairSample {
    u: Vec<f64>,
    v: Vec<f64>,
    tau: Option<f64>,
    normal: Option<(Vec<f64>, Vec<f64>)>,
    logs: [Option<RotLogs>; 4],
}

struct RotLogs {
    lu: Vec<f64>,
    lv: Vec<f64>,
    llu: Vec<f64>,
    llv: Vec<f64>,
}

impl PairSample {
    /// Builds from separate coordinate slices; values are clamped.
    pub fn new(u: &[f64], v: &[f64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::domain("pair sample coordinates differ in length"));
        }
        if let Some(bad) = u.iter().chain(v).find(|x| !(**x >= 0.0 && **x <= 1.0)) {
            return Err(Error::domain(format!("pseudo-observation outside [0, 1]: {bad}")));
        }
        Ok(Self {
            u: u.iter().map(|&x| clamp(x)).collect(),
            v: v.iter().map(|&x| clamp(x)).collect(),
            tau: None,
            normal: None,
            logs: [None, None, None, None],
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let u: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let v: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        Self::new(&u, &v)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn kendall_tau(&mut self) -> f64 {
        if let Some(t) = self.tau {
            return t;
        }
        let t = kendall_tau(&self.u, &self.v);
        self.tau = Some(t);
        t
    }

    fn normal_scores(&mut self) -> &(Vec<f64>, Vec<f64>) {
        if self.normal.is_none() {
            let x = self.u.iter().map(|&u| norm_quantile(u)).collect();
            let y = self.v.iter().map(|&v| norm_quantile(v)).collect();
            self.normal = Some((x, y));
        }
        self.normal.as_ref().unwrap()
    }

    fn rot_logs(&mut self, r: Rotation) -> &RotLogs {
        let idx = (r.degrees() / 90) as usize;
        if self.logs[idx].is_none() {
            let n = self.u.len();
            let mut logs = RotLogs {
                lu: Vec::with_capacity(n),
                lv: Vec::with_capacity(n),
                llu: Vec::with_capacity(n),
                llv: Vec::with_capacity(n),
            };
            for i in 0..n {
                let (a, b) = r.map(self.u[i], self.v[i]);
                let (la, lb) = (clamp(a).ln(), clamp(b).ln());
                logs.lu.push(la);
                logs.lv.push(lb);
                logs.llu.push((-la).ln());
                logs.llv.push((-lb).ln());
            }
            self.logs[idx] = Some(logs);
        }
        self.logs[idx].as_ref().unwrap()
    }

    /// Log-likelihood of `c` on this sample.
    pub fn log_likelihood(&self, c: &BivariateCopula) -> f64 {
        self.u.iter().zip(&self.v).map(|(&u, &v)| c.ln_pdf(u, v)).sum()
    }
}

/// Fits one family by maximum likelihood; returns the copula and its
/// log-likelihood.
pub fn fit_mle(family: CopulaFamily, pseudo_obs: &[(f64, f64)]) -> Result<(BivariateCopula, f64)> {
    let mut sample = PairSample::from_pairs(pseudo_obs)?;
    fit_family(family, &mut sample)
}

/// Fits every family in `catalog` and keeps the one with the lowest AIC
/// (ties go to the earlier entry).
pub fn select_family(pseudo_obs: &[(f64, f64)], catalog: &[CopulaFamily]) -> Result<BivariateCopula> {
    let mut sample = PairSample::from_pairs(pseudo_obs)?;
    select_in(&mut sample, catalog, SelectionCriterion::Aic).map(|s| s.copula)
}

/// Outcome of a family selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selected {
    pub copula: BivariateCopula,
    pub log_likelihood: f64,
    pub criterion: f64,
}

pub fn select_in(
    sample: &mut PairSample,
    catalog: &[CopulaFamily],
    criterion: SelectionCriterion,
) -> Result<Selected> {
    if catalog.is_empty() {
        return Err(Error::domain("copula catalog is empty"));
    }
    let n = sample.len();
    let mut best: Option<Selected> = None;
    let mut last_err = None;
    for &family in catalog {
        match fit_family(family, sample) {
            Ok((copula, ll)) => {
                let ic = -2.0 * ll + criterion.penalty(family.n_parameters(), n);
                if best.map_or(true, |b| ic < b.criterion) {
                    best = Some(Selected {
                        copula,
                        log_likelihood: ll,
                        criterion: ic,
                    });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!(),
    }
}

pub fn fit_family(family: CopulaFamily, sample: &mut PairSample) -> Result<(BivariateCopula, f64)> {
    if sample.len() < 10 {
        return Err(Error::domain(format!(
            "copula fit needs at least 10 observations, got {}",
            sample.len()
        )));
    }
    let family = CopulaFamily::new(family.tag, family.rotation)?;
    let tau = sample.kendall_tau();
    let rot = family.rotation;
    // Kendall's tau of the data after undoing the rotation
    let tau_base = match rot {
        Rotation::R90 | Rotation::R270 => -tau,
        _ => tau,
    };
    let (copula, ll) = match family.tag {
        FamilyTag::Independence => (BivariateCopula::independence(), 0.0),
        FamilyTag::Gaussian => fit_gaussian(sample, tau)?,
        FamilyTag::StudentT => fit_student(sample, tau)?,
        FamilyTag::Clayton => {
            let logs = sample.rot_logs(rot);
            let n = logs.lu.len() as f64;
            let lin: f64 = logs.lu.iter().zip(&logs.lv).map(|(a, b)| a + b).sum();
            let f = |th: f64| -> f64 {
                let s: f64 = logs
                    .lu
                    .iter()
                    .zip(&logs.lv)
                    .map(|(&a, &b)| ((-th * a).exp_m1() + (-th * b).exp_m1()).ln_1p())
                    .sum();
                n * th.ln_1p() - (1.0 + th) * lin - (2.0 + 1.0 / th) * s
            };
            let start = if tau_base > 0.0 {
                (2.0 * tau_base / (1.0 - tau_base)).clamp(CLAYTON_RANGE.0, CLAYTON_RANGE.1)
            } else {
                CLAYTON_RANGE.0
            };
            let th = maximize(f, CLAYTON_RANGE.0, CLAYTON_RANGE.1, start, 0.25 + 0.4 * start);
            (BivariateCopula::clayton(th.0, rot)?, th.1)
        }
        FamilyTag::Gumbel => {
            let logs = sample.rot_logs(rot);
            let lin: f64 = logs.lu.iter().zip(&logs.lv).map(|(a, b)| a + b).sum();
            let llin: f64 = logs.llu.iter().zip(&logs.llv).map(|(a, b)| a + b).sum();
            let f = |th: f64| -> f64 {
                let s: f64 = logs
                    .llu
                    .iter()
                    .zip(&logs.llv)
                    .map(|(&a, &b)| {
                        let ls = ((th * a).exp() + (th * b).exp()).ln();
                        let big_a = (ls / th).exp();
                        -big_a + (1.0 / th - 2.0) * ls + (big_a + th - 1.0).ln()
                    })
                    .sum();
                s - lin + (th - 1.0) * llin
            };
            let start = if tau_base > 0.0 {
                (1.0 / (1.0 - tau_base)).clamp(GUMBEL_RANGE.0, GUMBEL_RANGE.1)
            } else {
                GUMBEL_RANGE.0
            };
            let th = maximize(f, GUMBEL_RANGE.0, GUMBEL_RANGE.1, start, 0.15 + 0.4 * (start - 1.0));
            (BivariateCopula::gumbel(th.0, rot)?, th.1)
        }
        FamilyTag::Frank => {
            let (u, v) = (&sample.u, &sample.v);
            let n = u.len() as f64;
            let lin: f64 = u.iter().zip(v).map(|(a, b)| a + b).sum();
            let f = |th: f64| -> f64 {
                if th.abs() < 1e-8 {
                    return 0.0;
                }
                let em1 = (-th).exp_m1();
                let s: f64 = u
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| (-em1 - (-th * a).exp_m1() * (-th * b).exp_m1()).abs().ln())
                    .sum();
                n * (th * -em1).ln() - th * lin - 2.0 * s
            };
            let start = frank_theta_from_tau(tau);
            let (mut th, ll) = maximize(f, -FRANK_MAX, FRANK_MAX, start, 1.0 + 0.4 * start.abs());
            if th.abs() < 1e-4 {
                th = if th < 0.0 { -1e-4 } else { 1e-4 };
            }
            let c = BivariateCopula::frank(th)?;
            let ll = if th.abs() <= 1e-4 { sample.log_likelihood(&c) } else { ll };
            (c, ll)
        }
    };
    if !ll.is_finite() {
        return Err(Error::numeric(format!(
            "{} fit produced a non-finite log-likelihood",
            family.label()
        )));
    }
    Ok((copula, ll))
}

// Brent on a window of half-width `reach` around `start`, widened to the
// full range [lo, hi] when the optimum sits on an inner window edge. The
// start value is kept if it beats the optimum.
fn maximize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, start: f64, reach: f64) -> (f64, f64) {
    let g = |x: f64| {
        let y = f(x);
        if y.is_finite() {
            -y
        } else {
            f64::MAX
        }
    };
    let (a, b) = ((start - reach).max(lo), (start + reach).min(hi));
    let (mut x, mut neg) = brent_minimize(g, a, b, FIT_XTOL);
    let edge = 4.0 * FIT_XTOL;
    if (a > lo && x - a < edge) || (b < hi && b - x < edge) {
        (x, neg) = brent_minimize(g, lo, hi, FIT_XTOL);
    }
    let fs = f(start);
    if fs.is_finite() && fs > -neg {
        (start, fs)
    } else {
        (x, -neg)
    }
}

fn fit_gaussian(sample: &mut PairSample, tau: f64) -> Result<(BivariateCopula, f64)> {
    let n = sample.len() as f64;
    let (x, y) = sample.normal_scores();
    let q: f64 = x.iter().zip(y).map(|(a, b)| a * a + b * b).sum();
    let p: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let ll = |rho: f64| {
        let r2 = rho * rho;
        -0.5 * n * (1.0 - r2).ln() - (r2 * q - 2.0 * rho * p) / (2.0 * (1.0 - r2))
    };
    let start = (PI / 2.0 * tau).sin().clamp(-RHO_MAX, RHO_MAX);
    let (rho, val) = maximize(ll, -RHO_MAX, RHO_MAX, start, 0.15);
    Ok((BivariateCopula::gaussian(rho)?, val))
}

// Student-t scores `g(z) = t_nu^{-1}(Phi(z))` on a normal-score grid,
// interpolated by cubic Hermite polynomials. Quantiles are `g(Phi^{-1}(p))`
// and the cdf inverts the same interpolant, so both directions agree to
// rounding; against the exact functions the error is below 1e-8 in score.
#[derive(Debug)]
struct TScoreTable {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const T_TABLE_Z: f64 = 6.5;
const T_TABLE_STEPS_PER_UNIT: f64 = 64.0;

// grid dof and grid dof + 1, the only t laws a fitted copula uses
const T_TABLE_DOF: [f64; 14] = [2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 11.0, 15.0, 16.0, 30.0, 31.0];

impl TScoreTable {
    fn build(nu: f64) -> Self {
        let t = StudentT::new(nu);
        let n = (2.0 * T_TABLE_Z * T_TABLE_STEPS_PER_UNIT) as usize + 1;
        let mut values = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        for i in 0..n {
            let z = -T_TABLE_Z + i as f64 / T_TABLE_STEPS_PER_UNIT;
            // the upper half by symmetry keeps precision where p is near 1
            let q = if z > 0.0 { -t.quantile(norm_cdf(-z)) } else { t.quantile(norm_cdf(z)) };
            values.push(q);
            slopes.push(norm_pdf(z) / t.pdf(q));
        }
        Self { values, slopes }
    }

    fn eval(&self, z: f64, t: &StudentT) -> f64 {
        let pos = (z + T_TABLE_Z) * T_TABLE_STEPS_PER_UNIT;
        if !(pos >= 0.0 && pos < (self.values.len() - 1) as f64) {
            return t.quantile(norm_cdf(z));
        }
        let i = pos as usize;
        let s = pos - i as f64;
        let h = 1.0 / T_TABLE_STEPS_PER_UNIT;
        let (p0, p1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
    }

    fn quantile(&self, p: f64, t: &StudentT) -> f64 {
        if p < 0.5 {
            self.eval(norm_quantile(p), t)
        } else {
            -self.eval(norm_quantile(1.0 - p), t)
        }
    }

    fn cdf(&self, x: f64, t: &StudentT) -> f64 {
        let upper = x > 0.0;
        let y = if upper { -x } else { x };
        let n = self.values.len();
        if !(y >= self.values[0]) {
            return if upper { 1.0 - t.cdf(y) } else { t.cdf(y) };
        }
        // only the lower half of the table is searched
        let i = self.values[..n / 2 + 1].partition_point(|&q| q <= y).clamp(1, n / 2) - 1;
        let h = 1.0 / T_TABLE_STEPS_PER_UNIT;
        let (p0, p1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let mut s = if p1 > p0 { ((y - p0) / (p1 - p0)).clamp(0.0, 1.0) } else { 0.0 };
        for _ in 0..6 {
            let s2 = s * s;
            let s3 = s2 * s;
            let f = (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1
                + (s3 - s2) * m1
                - y;
            let df = (6.0 * s2 - 6.0 * s) * p0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * p1
                + (3.0 * s2 - 2.0 * s) * m1;
            let step = f / df;
            s = (s - step).clamp(0.0, 1.0);
            if step.abs() < 1e-13 {
                break;
            }
        }
        let z = -T_TABLE_Z + (i as f64 + s) * h;
        if upper {
            norm_cdf(-z)
        } else {
            norm_cdf(z)
        }
    }
}

fn t_score_table(k: usize) -> &'static TScoreTable {
    static TABLES: [OnceBox<TScoreTable>; 14] = [const { OnceBox::new() }; 14];
    TABLES[k].get_or_init(|| Box::new(TScoreTable::build(T_TABLE_DOF[k])))
}

// Student-t law used inside the copula: tabulated for the dof the fitter
// produces, exact otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TDist {
    exact: StudentT,
    table: Option<u8>,
}

impl TDist {
    fn new(nu: f64) -> Self {
        Self {
            exact: StudentT::new(nu),
            table: T_TABLE_DOF.iter().position(|&d| d == nu).map(|k| k as u8),
        }
    }

    #[inline]
    fn quantile(&self, p: f64) -> f64 {
        match self.table {
            Some(k) => t_score_table(k as usize).quantile(p, &self.exact),
            None => self.exact.quantile(p),
        }
    }

    #[inline]
    fn cdf(&self, x: f64) -> f64 {
        match self.table {
            Some(k) => t_score_table(k as usize).cdf(x, &self.exact),
            None => self.exact.cdf(x),
        }
    }
}

fn fit_student(sample: &mut PairSample, tau: f64) -> Result<(BivariateCopula, f64)> {
    let start = (PI / 2.0 * tau).sin().clamp(-RHO_MAX, RHO_MAX);
    let (zx, zy) = sample.normal_scores();
    let (zx, zy) = (zx.clone(), zy.clone());
    let mut best: Option<(f64, f64, Vec<f64>, Vec<f64>, f64)> = None;
    for &nu in T_DOF_GRID.iter() {
        let t = StudentT::new(nu);
        let table = t_score_table(T_TABLE_DOF.iter().position(|&d| d == nu).unwrap());
        let x: Vec<f64> = zx.iter().map(|&z| table.eval(z, &t)).collect();
        let y: Vec<f64> = zy.iter().map(|&z| table.eval(z, &t)).collect();
        let marg: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a * a / nu).ln_1p() + (b * b / nu).ln_1p())
            .sum::<f64>()
            * 0.5
            * (nu + 1.0);
        let ll = student_profile(nu, &x, &y, marg, start);
        if best.as_ref().map_or(true, |b| ll > b.1) {
            best = Some((nu, ll, x, y, marg));
        }
    }
    let (nu, _, x, y, marg) = best.unwrap();
    let f = |rho: f64| student_profile(nu, &x, &y, marg, rho);
    let (rho, ll) = maximize(f, -RHO_MAX, RHO_MAX, start, 0.15);
    Ok((BivariateCopula::student_t(rho, nu)?, ll))
}

fn student_profile(nu: f64, x: &[f64], y: &[f64], marg: f64, rho: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    let n = x.len() as f64;
    let quad: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| ((a * a + b * b - 2.0 * rho * a * b) / (nu * r2)).ln_1p())
        .sum();
    n * (student_ln_const(nu) - 0.5 * r2.ln()) - 0.5 * (nu + 2.0) * quad + marg
}
