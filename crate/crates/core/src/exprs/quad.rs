//! Numeric antiderivatives `F(ξ) = ∫_0^ξ f(t) dt` for expression-defined `f`.

use super::{Expr, ExprError};

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64, ExprError>
where
    F: FnMut(f64) -> Result<f64, ExprError>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let c = 0.5 * (a + b);
    let fc = f(c)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(&mut f, a, b, fa, fc, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fc: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, ExprError>
where
    F: FnMut(f64) -> Result<f64, ExprError>,
{
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d)?, f(e)?);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, c, fa, fd, fc, left, tol / 2.0, depth - 1)?
        + simpson_step(f, c, b, fc, fe, fb, right, tol / 2.0, depth - 1)?)
}

/// `∫_0^ξ f(u) du` by adaptive Simpson, absolute tolerance `1e-12`.
pub fn antiderivative(f: &Expr, xi: f64) -> Result<f64, ExprError> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    adaptive_simpson(|t| f.eval_u(t), 0.0, xi, 1e-12)
}

/// `F` tabulated on a uniform grid through 0 and evaluated by cubic Hermite
/// interpolation, using the exact slopes `f` at the nodes.
///
/// The table is filled outward from 0 at construction and is read-only
/// afterwards. If `f` hits a domain error the table ends at the last good
/// node; arguments past the end are integrated directly from it.
#[derive(Clone, Debug)]
pub struct PrimitiveTable {
    f: Expr,
    step: f64,
    /// Node `k` is at `(k - origin) * step`.
    origin: usize,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl PrimitiveTable {
    pub const DEFAULT_STEP: f64 = 1e-3;

    pub fn build(f: Expr, lo: f64, hi: f64, step: f64) -> Self {
        let below = (-lo.min(0.0) / step).ceil() as usize;
        let above = (hi.max(0.0) / step).ceil() as usize;
        let node = |k: isize| k as f64 * step;

        let mut up_vals = vec![0.0];
        let mut up_slopes = Vec::new();
        let mut down_vals = Vec::new();
        let mut down_slopes = Vec::new();
        if let Ok(f0) = f.eval_u(0.0) {
            up_slopes.push(f0);
            let mut acc = 0.0;
            for k in 1..=above as isize {
                let (a, b) = (node(k - 1), node(k));
                match (adaptive_simpson(|t| f.eval_u(t), a, b, 1e-15), f.eval_u(b)) {
                    (Ok(piece), Ok(slope)) => {
                        acc += piece;
                        up_vals.push(acc);
                        up_slopes.push(slope);
                    }
                    _ => break,
                }
            }
            let mut acc = 0.0;
            for k in 1..=below as isize {
                let (a, b) = (node(-k), node(-k + 1));
                match (adaptive_simpson(|t| f.eval_u(t), a, b, 1e-15), f.eval_u(a)) {
                    (Ok(piece), Ok(slope)) => {
                        acc -= piece;
                        down_vals.push(acc);
                        down_slopes.push(slope);
                    }
                    _ => break,
                }
            }
        } else {
            up_slopes.push(f64::NAN);
        }
        let origin = down_vals.len();
        let values: Vec<f64> = down_vals.into_iter().rev().chain(up_vals).collect();
        let slopes: Vec<f64> = down_slopes.into_iter().rev().chain(up_slopes).collect();
        PrimitiveTable {
            f,
            step,
            origin,
            values,
            slopes,
        }
    }

    /// The interval covered by tabulated nodes.
    pub fn range(&self) -> (f64, f64) {
        let lo = -(self.origin as f64) * self.step;
        let hi = (self.values.len() - 1 - self.origin) as f64 * self.step;
        (lo, hi)
    }

    pub fn eval(&self, xi: f64) -> Result<f64, ExprError> {
        if xi == 0.0 {
            return Ok(0.0);
        }
        let (lo, hi) = self.range();
        if self.slopes[self.origin].is_nan() || xi < lo || xi > hi {
            let (anchor, base) = if xi > hi {
                (hi, *self.values.last().unwrap())
            } else if xi < lo {
                (lo, self.values[0])
            } else {
                (0.0, 0.0)
            };
            return Ok(base + adaptive_simpson(|t| self.f.eval_u(t), anchor, xi, 1e-12)?);
        }
        let pos = xi / self.step + self.origin as f64;
        let k = (pos.floor() as usize).min(self.values.len() - 2);
        let t = pos - k as f64;
        let h = self.step;
        let (f0, f1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.slopes[k], self.slopes[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * h * d1)
    }
}

/// How `F` is obtained.
#[derive(Clone, Debug)]
pub enum Primitive {
    /// User-supplied closed form.
    Closed(Expr),
    Tabulated(PrimitiveTable),
}

impl Primitive {
    pub fn eval(&self, xi: f64) -> Result<f64, ExprError> {
        match self {
            Primitive::Closed(e) => e.eval_u(xi),
            Primitive::Tabulated(t) => t.eval(xi),
        }
    }
}

/// `f` together with its primitive `F` and a difference-quotient slope `f'`.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    f: Expr,
    primitive: Primitive,
}

impl Nonlinearity {
    /// Tabulates `F` on `[-range, range]`.
    pub fn tabulated(f: Expr, range: f64) -> Self {
        let table = PrimitiveTable::build(f.clone(), -range, range, PrimitiveTable::DEFAULT_STEP);
        Nonlinearity {
            f,
            primitive: Primitive::Tabulated(table),
        }
    }

    pub fn closed_form(f: Expr, big_f: Expr) -> Self {
        Nonlinearity {
            f,
            primitive: Primitive::Closed(big_f),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.f
    }

    pub fn primitive(&self) -> &Primitive {
        &self.primitive
    }

    pub fn value(&self, t: f64) -> Result<f64, ExprError> {
        self.f.eval_u(t)
    }

    /// `F(t) = ∫_0^t f`.
    pub fn integral(&self, t: f64) -> Result<f64, ExprError> {
        self.primitive.eval(t)
    }

    /// Central-difference `f'(t)`.
    pub fn slope(&self, t: f64) -> Result<f64, ExprError> {
        let h = 6e-6 * t.abs().max(1.0);
        Ok((self.f.eval_u(t + h)? - self.f.eval_u(t - h)?) / (2.0 * h))
    }
}
