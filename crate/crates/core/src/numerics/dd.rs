//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64`s,
//! giving roughly 106 bits of significand.
//!
//! Used as the reference precision when forming finite differences, so that
//! rounding noise in the objective stays far below the derivatives being
//! checked.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use super::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const fn new(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }

    fn from_pair((hi, lo): (f64, f64)) -> Self {
        Dd { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p1, p2) = two_prod(self.hi, b);
        Dd::from_pair(quick_two_sum(p1, p2 + self.lo * b))
    }

    fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let (p1, p2) = two_prod(q1, b);
        let (s, e) = two_sum(self.hi, -p1);
        let q2 = (s + (e - p2 + self.lo)) / b;
        Dd::from_pair(quick_two_sum(q1, q2))
    }

    fn square(self) -> Self {
        self * self
    }

    fn exp_impl(self) -> Self {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::new(0.0);
        }
        if self.hi == 0.0 {
            return Dd::new(1.0);
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2.mul_f64(k)).mul_f64(1.0 / 512.0);
        // expm1(r) by Taylor series; |r| < 7e-4 so terms shrink fast
        let mut sum = r;
        let mut term = r;
        for i in 2..30 {
            term = (term * r).div_f64(i as f64);
            sum += term;
            if term.hi.abs() < 1e-36 {
                break;
            }
        }
        // expm1(2x) = 2 expm1(x) + expm1(x)^2
        for _ in 0..9 {
            sum = sum.mul_f64(2.0) + sum.square();
        }
        (sum + Dd::new(1.0)).mul_f64(2f64.powi(k as i32))
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd::new(v)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.hi + self.lo)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Dd::from_pair(quick_two_sum(s1, s2 + t2))
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        Dd::from_pair(quick_two_sum(p1, p2))
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() {
            return Dd::new(q1);
        }
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        Dd::from_pair(quick_two_sum(q1, q2)) + Dd::new(q3)
    }
}

macro_rules! assign_op {
    ($tr:ident, $f:ident, $op:tt) => {
        impl $tr for Dd {
            fn $f(&mut self, b: Dd) {
                *self = *self $op b;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(iter: I) -> Dd {
        iter.fold(Dd::new(0.0), |a, b| a + b)
    }
}

impl Scalar for Dd {
    const NAME: &'static str = "dd";
    const ZERO: Self = Dd::new(0.0);
    const ONE: Self = Dd::new(1.0);

    fn of(v: f64) -> Self {
        Dd::new(v)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::new(self.hi.sqrt());
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let corr = (self - Dd::new(ax).square()).hi * (x * 0.5);
        Dd::from_pair(two_sum(ax, corr))
    }

    fn exp(self) -> Self {
        self.exp_impl()
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::new(self.hi.ln());
        }
        // one Newton step on exp(y) = x doubles the f64 estimate's precision
        let y = Dd::new(self.hi.ln());
        y + self * (-y).exp_impl() - Dd::new(1.0)
    }

    fn tanh(self) -> Self {
        if self.hi.abs() > 40.0 {
            return Dd::new(self.hi.signum());
        }
        let e = self.mul_f64(2.0).exp_impl();
        (e - Dd::new(1.0)) / (e + Dd::new(1.0))
    }

    fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        for i in 0..m as isize {
            for j in 0..n as isize {
                let mut acc = Dd::ZERO;
                for p in 0..k as isize {
                    acc += *a.offset(i * rsa + p * csa) * *b.offset(p * rsb + j * csb);
                }
                let out = c.offset(i * rsc + j * csc);
                *out = if beta == Dd::ZERO { alpha * acc } else { alpha * acc + beta * *out };
            }
        }
    }
}
