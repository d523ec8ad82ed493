//! Scalar types. Everything numeric in the crate is generic over [`Real`],
//! implemented for `f64` and for the double-double type [`Dd`].

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

/// Floating-point scalar used throughout the crate.
pub trait Real:
    Float + FloatConst + FromPrimitive + Default + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lift an `f64` literal.
    fn of(x: f64) -> Self;
    /// Round to the nearest `f64`.
    fn to64(self) -> f64;

    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn to64(self) -> f64 {
        self
    }
}

impl Real for Dd {
    #[inline]
    fn of(x: f64) -> Self {
        Dd::lit(x)
    }
    #[inline]
    fn to64(self) -> f64 {
        self.hi
    }
}

/// Unevaluated sum `hi + lo` of two doubles with `|lo| <= ulp(hi)/2`,
/// giving roughly 106 bits of significand.
#[derive(Clone, Copy, Default)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

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
fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

const PI: Dd = Dd { hi: std::f64::consts::PI, lo: 1.2246467991473532e-16 };
const TAU: Dd = Dd { hi: std::f64::consts::TAU, lo: 2.4492935982947064e-16 };
const PI_2: Dd = Dd { hi: std::f64::consts::FRAC_PI_2, lo: 6.123233995736766e-17 };
const E: Dd = Dd { hi: std::f64::consts::E, lo: 1.4456468917292502e-16 };
const LN_2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.3190468138462996e-17 };
const LN_10: Dd = Dd { hi: std::f64::consts::LN_10, lo: -2.1707562233822494e-16 };

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    fn norm(hi: f64, lo: f64) -> Dd {
        let (h, l) = quick_two_sum(hi, lo);
        if h.is_finite() {
            Dd { hi: h, lo: l }
        } else {
            Dd { hi: h, lo: 0.0 }
        }
    }

    /// Exact lift of an `f64`.
    #[inline]
    pub const fn lit(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        Dd::norm(p1, p2 + self.lo * b)
    }

    #[inline]
    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p1, p2) = two_prod(q1, b);
        let (s, e) = two_sum(self.hi, -p1);
        let q2 = (s + (e - p2 + self.lo)) / b;
        Dd::norm(q1, q2)
    }

    #[inline]
    fn sqr(self) -> Dd {
        let (p1, p2) = two_prod(self.hi, self.hi);
        Dd::norm(p1, p2 + 2.0 * self.hi * self.lo + self.lo * self.lo)
    }

    fn ldexp(self, k: i32) -> Dd {
        let s = 2f64.powi(k);
        Dd { hi: self.hi * s, lo: self.lo * s }
    }

    fn is_zero_(self) -> bool {
        self.hi == 0.0
    }

    /// `exp(x) - 1` for |x| below ~0.35 by Taylor series.
    fn expm1_small(self) -> Dd {
        let mut term = self;
        let mut sum = self;
        let mut n = 1.0;
        loop {
            n += 1.0;
            term = (term * self).div_f64(n);
            sum += term;
            if term.hi.abs() < 1e-36 * sum.hi.abs().max(1e-300) || n > 60.0 {
                break;
            }
        }
        sum
    }

    /// sin and cos of |t| <= pi/4 by Taylor series.
    fn sin_cos_small(t: Dd) -> (Dd, Dd) {
        let t2 = t.sqr();
        let mut s = t;
        let mut term = t;
        let mut k = 1.0;
        loop {
            term = -(term * t2).div_f64((k + 1.0) * (k + 2.0));
            k += 2.0;
            s += term;
            if term.hi.abs() < 1e-35 || k > 60.0 {
                break;
            }
        }
        let mut c = Dd::ONE;
        let mut term = Dd::ONE;
        let mut k = 0.0;
        loop {
            term = -(term * t2).div_f64((k + 1.0) * (k + 2.0));
            k += 2.0;
            c += term;
            if term.hi.abs() < 1e-35 || k > 60.0 {
                break;
            }
        }
        (s, c)
    }
}

impl From<f64> for Dd {
    #[inline]
    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }
}

impl PartialEq for Dd {
    fn eq(&self, o: &Dd) -> bool {
        self.hi == o.hi && self.lo == o.lo
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, o: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&o.lo),
            ord => Some(ord),
        }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        if !s1.is_finite() {
            return Dd::lit(s1);
        }
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Dd::norm(s1, s2 + t2)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, b.hi);
        Dd::norm(p1, p2 + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() || b.hi.is_infinite() {
            return Dd::lit(q1);
        }
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Dd { hi: q1, lo: q2 } + Dd::lit(q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, b: Dd) -> Dd {
        self - b * (self / b).trunc()
    }
}

macro_rules! assign_ops {
    ($($tr:ident $m:ident $op:tt),*) => {$(
        impl $tr for Dd {
            #[inline]
            fn $m(&mut self, b: Dd) {
                *self = *self $op b;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /, RemAssign rem_assign %);

impl Sum for Dd {
    fn sum<I: Iterator<Item = Dd>>(it: I) -> Dd {
        it.fold(Dd::ZERO, |a, b| a + b)
    }
}

impl Zero for Dd {
    fn zero() -> Dd {
        Dd::ZERO
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for Dd {
    fn one() -> Dd {
        Dd::ONE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDdError;

impl fmt::Display for ParseDdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid double-double literal")
    }
}

impl std::error::Error for ParseDdError {}

impl FromStr for Dd {
    type Err = ParseDdError;

    /// Decimal literal, parsed digit by digit so the value is accurate to
    /// double-double precision.
    fn from_str(s: &str) -> Result<Dd, ParseDdError> {
        let s = s.trim();
        let (neg, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let lower = body.to_ascii_lowercase();
        match lower.as_str() {
            "inf" | "infinity" => {
                return Ok(Dd::lit(if neg { f64::NEG_INFINITY } else { f64::INFINITY }))
            }
            "nan" => return Ok(Dd::lit(f64::NAN)),
            _ => {}
        }
        let (mant, exp) = match lower.find('e') {
            Some(i) => (&lower[..i], lower[i + 1..].parse::<i32>().map_err(|_| ParseDdError)?),
            None => (lower.as_str(), 0),
        };
        let mut v = Dd::ZERO;
        let mut scale = 0i32;
        let mut seen_dot = false;
        let mut digits = 0;
        for c in mant.chars() {
            match c {
                '.' if !seen_dot => seen_dot = true,
                '0'..='9' => {
                    v = v.mul_f64(10.0) + Dd::lit(c as u8 as f64 - 48.0);
                    digits += 1;
                    if seen_dot {
                        scale -= 1;
                    }
                }
                _ => return Err(ParseDdError),
            }
        }
        if digits == 0 {
            return Err(ParseDdError);
        }
        let e = scale + exp;
        let p = Dd::lit(10.0).powi(e.abs());
        let v = if e >= 0 { v * p } else { v / p };
        Ok(if neg { -v } else { v })
    }
}

impl Num for Dd {
    type FromStrRadixErr = ParseDdError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Dd, ParseDdError> {
        if radix != 10 {
            return Err(ParseDdError);
        }
        s.parse()
    }
}

impl ToPrimitive for Dd {
    fn to_i64(&self) -> Option<i64> {
        let t = self.trunc();
        let v = t.hi as i128 + t.lo as i128;
        i64::try_from(v).ok()
    }
    fn to_u64(&self) -> Option<u64> {
        let t = self.trunc();
        let v = t.hi as i128 + t.lo as i128;
        u64::try_from(v).ok()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi)
    }
}

impl FromPrimitive for Dd {
    fn from_i64(n: i64) -> Option<Dd> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Dd::norm(hi, lo))
    }
    fn from_u64(n: u64) -> Option<Dd> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Dd::norm(hi, lo))
    }
    fn from_f64(x: f64) -> Option<Dd> {
        Some(Dd::lit(x))
    }
}

impl NumCast for Dd {
    fn from<T: ToPrimitive>(n: T) -> Option<Dd> {
        n.to_f64().map(Dd::lit)
    }
}

impl FloatConst for Dd {
    fn E() -> Dd {
        E
    }
    fn FRAC_1_PI() -> Dd {
        Dd::ONE / PI
    }
    fn FRAC_1_SQRT_2() -> Dd {
        Dd::lit(0.5).sqrt()
    }
    fn FRAC_2_PI() -> Dd {
        Dd::lit(2.0) / PI
    }
    fn FRAC_2_SQRT_PI() -> Dd {
        Dd::lit(2.0) / PI.sqrt()
    }
    fn FRAC_PI_2() -> Dd {
        PI_2
    }
    fn FRAC_PI_3() -> Dd {
        PI.div_f64(3.0)
    }
    fn FRAC_PI_4() -> Dd {
        PI.ldexp(-2)
    }
    fn FRAC_PI_6() -> Dd {
        PI.div_f64(6.0)
    }
    fn FRAC_PI_8() -> Dd {
        PI.ldexp(-3)
    }
    fn LN_10() -> Dd {
        LN_10
    }
    fn LN_2() -> Dd {
        LN_2
    }
    fn LOG10_E() -> Dd {
        Dd::ONE / LN_10
    }
    fn LOG2_E() -> Dd {
        Dd::ONE / LN_2
    }
    fn PI() -> Dd {
        PI
    }
    fn SQRT_2() -> Dd {
        Dd::lit(2.0).sqrt()
    }
    fn TAU() -> Dd {
        TAU
    }
    fn LOG10_2() -> Dd {
        LN_2 / LN_10
    }
    fn LOG2_10() -> Dd {
        LN_10 / LN_2
    }
}

impl Float for Dd {
    fn nan() -> Dd {
        Dd::lit(f64::NAN)
    }
    fn infinity() -> Dd {
        Dd::lit(f64::INFINITY)
    }
    fn neg_infinity() -> Dd {
        Dd::lit(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Dd {
        Dd::lit(-0.0)
    }
    fn min_value() -> Dd {
        Dd::lit(f64::MIN)
    }
    fn min_positive_value() -> Dd {
        Dd::lit(f64::MIN_POSITIVE)
    }
    fn max_value() -> Dd {
        Dd::lit(f64::MAX)
    }
    fn epsilon() -> Dd {
        Dd::lit(2f64.powi(-104))
    }
    fn is_nan(self) -> bool {
        self.hi.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi.classify()
    }
    fn floor(self) -> Dd {
        let h = self.hi.floor();
        if h == self.hi {
            Dd::norm(h, self.lo.floor())
        } else {
            Dd::lit(h)
        }
    }
    fn ceil(self) -> Dd {
        let h = self.hi.ceil();
        if h == self.hi {
            Dd::norm(h, self.lo.ceil())
        } else {
            Dd::lit(h)
        }
    }
    fn round(self) -> Dd {
        if self.hi >= 0.0 {
            (self + Dd::lit(0.5)).floor()
        } else {
            -((-self) + Dd::lit(0.5)).floor()
        }
    }
    fn trunc(self) -> Dd {
        if self.hi >= 0.0 {
            self.floor()
        } else {
            self.ceil()
        }
    }
    fn fract(self) -> Dd {
        self - self.trunc()
    }
    fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Dd {
        Dd::lit(self.hi.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.hi.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi.is_sign_negative()
    }
    fn mul_add(self, a: Dd, b: Dd) -> Dd {
        self * a + b
    }
    fn recip(self) -> Dd {
        Dd::ONE / self
    }
    fn powi(self, n: i32) -> Dd {
        if n == 0 {
            return Dd::ONE;
        }
        let mut base = self;
        let mut k = n.unsigned_abs();
        let mut acc = Dd::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            k >>= 1;
            if k > 0 {
                base = base.sqr();
            }
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }
    fn powf(self, n: Dd) -> Dd {
        if self.is_zero_() {
            return if n.hi > 0.0 { Dd::ZERO } else { Dd::infinity() };
        }
        if self.hi < 0.0 {
            if n.fract().is_zero_() && n.hi.abs() < 2f64.powi(31) {
                return self.powi(n.hi as i32);
            }
            return Dd::nan();
        }
        (n * self.ln()).exp()
    }
    fn sqrt(self) -> Dd {
        if self.is_zero_() {
            return Dd::ZERO;
        }
        if self.hi < 0.0 {
            return Dd::nan();
        }
        if self.hi.is_infinite() {
            return self;
        }
        let x = Dd::lit(self.hi.sqrt());
        x + (self - x.sqr()) / x.mul_f64(2.0)
    }
    fn exp(self) -> Dd {
        if self.hi > 709.78 {
            return Dd::infinity();
        }
        if self.hi < -745.2 {
            return Dd::ZERO;
        }
        if self.hi.is_nan() {
            return self;
        }
        let k = (self.hi / LN_2.hi).round();
        let r = (self - LN_2.mul_f64(k)).ldexp(-10);
        let mut s = r.expm1_small();
        for _ in 0..10 {
            s = s.mul_f64(2.0) + s.sqr();
        }
        let v = s + Dd::ONE;
        // split the power of two so subnormal-range scalings stay exact
        let k = k as i32;
        let k1 = k / 2;
        v.ldexp(k1).ldexp(k - k1)
    }
    fn exp2(self) -> Dd {
        (self * LN_2).exp()
    }
    fn ln(self) -> Dd {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 { Dd::neg_infinity() } else { Dd::nan() };
        }
        if self.hi.is_infinite() {
            return self;
        }
        let x = Dd::lit(self.hi.ln());
        x + self * (-x).exp() - Dd::ONE
    }
    fn log(self, base: Dd) -> Dd {
        self.ln() / base.ln()
    }
    fn log2(self) -> Dd {
        self.ln() / LN_2
    }
    fn log10(self) -> Dd {
        self.ln() / LN_10
    }
    fn max(self, o: Dd) -> Dd {
        if self.is_nan() || o > self {
            o
        } else {
            self
        }
    }
    fn min(self, o: Dd) -> Dd {
        if self.is_nan() || o < self {
            o
        } else {
            self
        }
    }
    fn abs_sub(self, o: Dd) -> Dd {
        (self - o).max(Dd::ZERO)
    }
    fn cbrt(self) -> Dd {
        if self.is_zero_() || !self.is_finite() {
            return self;
        }
        let x = Dd::lit(self.hi.cbrt());
        x - (x.sqr() * x - self) / x.sqr().mul_f64(3.0)
    }
    fn hypot(self, o: Dd) -> Dd {
        let a = self.abs();
        let b = o.abs();
        let (big, small) = if a > b { (a, b) } else { (b, a) };
        if big.is_zero_() {
            return Dd::ZERO;
        }
        let r = small / big;
        big * (Dd::ONE + r.sqr()).sqrt()
    }
    fn sin(self) -> Dd {
        self.sin_cos().0
    }
    fn cos(self) -> Dd {
        self.sin_cos().1
    }
    fn tan(self) -> Dd {
        let (s, c) = self.sin_cos();
        s / c
    }
    fn asin(self) -> Dd {
        if self.abs() > Dd::ONE {
            return Dd::nan();
        }
        self.atan2((Dd::ONE - self.sqr()).sqrt())
    }
    fn acos(self) -> Dd {
        if self.abs() > Dd::ONE {
            return Dd::nan();
        }
        (Dd::ONE - self.sqr()).sqrt().atan2(self)
    }
    fn atan(self) -> Dd {
        self.atan2(Dd::ONE)
    }
    fn atan2(self, x: Dd) -> Dd {
        let y = self;
        if x.is_zero_() {
            if y.is_zero_() {
                return Dd::ZERO;
            }
            return if y.hi > 0.0 { PI_2 } else { -PI_2 };
        }
        if y.is_zero_() {
            return if x.hi > 0.0 { Dd::ZERO } else { PI };
        }
        let r = x.hypot(y);
        let xx = x / r;
        let yy = y / r;
        let mut z = Dd::lit(y.hi.atan2(x.hi));
        let (s, c) = z.sin_cos();
        if xx.hi.abs() > yy.hi.abs() {
            z += (yy - s) / c;
        } else {
            z -= (xx - c) / s;
        }
        z
    }
    fn sin_cos(self) -> (Dd, Dd) {
        if self.is_zero_() {
            return (Dd::ZERO, Dd::ONE);
        }
        if !self.is_finite() {
            return (Dd::nan(), Dd::nan());
        }
        let z = (self / TAU).round();
        let r = self - TAU * z;
        let j = (r.hi / PI_2.hi).round();
        let t = r - PI_2.mul_f64(j);
        let (s, c) = Dd::sin_cos_small(t);
        match (j as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
    fn exp_m1(self) -> Dd {
        if self.hi.abs() < 0.3 {
            self.expm1_small()
        } else {
            self.exp() - Dd::ONE
        }
    }
    fn ln_1p(self) -> Dd {
        if self.hi <= -1.0 {
            return if self.hi == -1.0 && self.lo == 0.0 { Dd::neg_infinity() } else { Dd::nan() };
        }
        if self.hi.abs() > 0.25 {
            return (Dd::ONE + self).ln();
        }
        let mut x = Dd::lit(self.hi.ln_1p());
        for _ in 0..2 {
            let y = x.exp_m1();
            x -= (y - self) / (Dd::ONE + y);
        }
        x
    }
    fn sinh(self) -> Dd {
        let e = self.exp_m1();
        (e + e / (e + Dd::ONE)).mul_f64(0.5)
    }
    fn cosh(self) -> Dd {
        let e = self.exp();
        (e + e.recip()).mul_f64(0.5)
    }
    fn tanh(self) -> Dd {
        let e = self.mul_f64(2.0).exp_m1();
        e / (e + Dd::lit(2.0))
    }
    fn asinh(self) -> Dd {
        let a = self.abs();
        let a2 = a.sqr();
        let v = (a + a2 / (Dd::ONE + (Dd::ONE + a2).sqrt())).ln_1p();
        if self.hi < 0.0 {
            -v
        } else {
            v
        }
    }
    fn acosh(self) -> Dd {
        if self < Dd::ONE {
            return Dd::nan();
        }
        (self + (self.sqr() - Dd::ONE).sqrt()).ln()
    }
    fn atanh(self) -> Dd {
        (self.mul_f64(2.0) / (Dd::ONE - self)).ln_1p().mul_f64(0.5)
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi.integer_decode()
    }
    fn to_degrees(self) -> Dd {
        self.mul_f64(180.0) / PI
    }
    fn to_radians(self) -> Dd {
        (self * PI).div_f64(180.0)
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e}, {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    /// Scientific notation with 32 significant digits, or the requested precision.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.hi.is_finite() {
            return write!(f, "{}", self.hi);
        }
        if self.hi == 0.0 {
            return f.write_str("0");
        }
        let digits = f.precision().map(|p| p + 1).unwrap_or(32).clamp(1, 34);
        let mut r = self.abs();
        let mut e = r.hi.log10().floor() as i32;
        r = if e >= 0 { r / Dd::lit(10.0).powi(e) } else { r * Dd::lit(10.0).powi(-e) };
        if r.hi >= 10.0 {
            r = r.div_f64(10.0);
            e += 1;
        } else if r.hi < 1.0 {
            r = r.mul_f64(10.0);
            e -= 1;
        }
        let mut out = String::new();
        if self.hi < 0.0 {
            out.push('-');
        }
        for i in 0..digits {
            let d = r.hi.floor().clamp(0.0, 9.0);
            out.push((b'0' + d as u8) as char);
            if i == 0 && digits > 1 {
                out.push('.');
            }
            r = (r - Dd::lit(d)).mul_f64(10.0);
        }
        write!(f, "{out}e{e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, b: Dd, tol: f64) -> bool {
        ((a - b).abs() / b.abs().max(Dd::ONE)).hi < tol
    }

    #[test]
    fn constants_round_trip() {
        let pi: Dd = "3.14159265358979323846264338327950288".parse().unwrap();
        assert!(close(Dd::PI(), pi, 1e-31));
        let ln2: Dd = "0.693147180559945309417232121458176568".parse().unwrap();
        assert!(close(Dd::LN_2(), ln2, 1e-31));
        assert!(close(Dd::SQRT_2().sqr(), Dd::lit(2.0), 1e-31));
    }

    #[test]
    fn elementary_identities() {
        for &x in &[0.1, 0.7, 1.3, 2.9, 5.5, -3.2, 17.0] {
            let x = Dd::lit(x) / Dd::lit(3.0);
            let (s, c) = x.sin_cos();
            assert!(close(s.sqr() + c.sqr(), Dd::ONE, 1e-31));
            assert!(close(x.exp().ln(), x, 1e-30));
            assert!(close(s.atan2(c), x.sin().atan2(x.cos()), 1e-31));
            assert!(close((x.abs() + Dd::ONE).sqrt().sqr(), x.abs() + Dd::ONE, 1e-31));
            assert!(close(x.exp_m1().ln_1p(), x, 1e-30));
            assert!(close(x.sinh().asinh(), x, 1e-30));
        }
        // sin(pi/6) = 1/2, atan(1) = pi/4
        assert!(close(Dd::FRAC_PI_6().sin(), Dd::lit(0.5), 1e-31));
        assert!(close(Dd::ONE.atan(), Dd::FRAC_PI_4(), 1e-31));
        assert!(close(Dd::ONE.exp(), Dd::E(), 1e-31));
    }

    #[test]
    fn sin_matches_f64_at_f64_precision() {
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            assert!((Dd::lit(x).sin().hi - x.sin()).abs() < 1e-15);
            assert!((Dd::lit(x).cos().hi - x.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn display_and_parse() {
        let third = Dd::ONE / Dd::lit(3.0);
        let s = format!("{third}");
        assert!(s.starts_with("3.333333333333333333333333333333"));
        let back: Dd = s.parse().unwrap();
        assert!(close(back, third, 1e-30));
        assert_eq!(format!("{:.3}", Dd::lit(-1234.5)), "-1.234e3");
    }

    #[test]
    fn rounding_functions() {
        let x = Dd::lit(2.0) - Dd::lit(1e-20);
        assert_eq!(x.floor(), Dd::ONE);
        assert_eq!(x.ceil(), Dd::lit(2.0));
        assert_eq!(Dd::lit(-2.5).round(), Dd::lit(-3.0));
        assert_eq!(Dd::lit(-2.5).trunc(), Dd::lit(-2.0));
        assert_eq!(Dd::lit(7.0) % Dd::lit(3.0), Dd::ONE);
    }

    #[test]
    fn catastrophic_cancellation_is_resolved() {
        let a = Dd::ONE + Dd::lit(1e-20);
        assert_eq!((a - Dd::ONE).hi, 1e-20);
    }
}
