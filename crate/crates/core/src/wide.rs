//! 384-bit binary floating point.
//!
//! `F384` carries a 384-bit mantissa (about 115 significant decimal digits)
//! and a 64-bit exponent. It is `Copy` and implements [`Real`], so every
//! routine in the crate can be instantiated with it. Arithmetic rounds to
//! nearest on a 64-bit guard word; transcendental functions are accurate to a
//! few units in the last place, which leaves well over 100 correct digits.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};
use std::str::FromStr;
use std::sync::OnceLock;

use num_traits::{FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

use crate::scalar::Real;

const N: usize = 6;
const MANT_BITS: i64 = 64 * N as i64;
/// Terms below `2^-CUTOFF` relative to the running sum are dropped.
const CUTOFF: i64 = MANT_BITS + 16;

type Limbs = [u64; N];
/// Mantissa plus one guard limb at index 0.
type Guarded = [u64; N + 1];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Zero,
    Normal,
    Inf,
    Nan,
}

/// 384-bit mantissa floating point number.
#[derive(Clone, Copy)]
pub struct F384 {
    class: Class,
    neg: bool,
    /// Value is `mant / 2^384 * 2^exp`; the top bit of `mant[N - 1]` is set.
    exp: i64,
    mant: Limbs,
}

/// Error returned when parsing a decimal string fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseF384Error(String);

impl fmt::Display for ParseF384Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid F384 literal: {}", self.0)
    }
}

impl std::error::Error for ParseF384Error {}

// ---------------------------------------------------------------------------
// limb helpers

fn shr_guarded(x: &mut Guarded, s: u64) {
    let limb = (s / 64) as usize;
    let bit = (s % 64) as u32;
    if limb > N {
        *x = [0; N + 1];
        return;
    }
    for i in 0..=N {
        let src = i + limb;
        let lo = if src <= N { x[src] >> bit } else { 0 };
        let hi = if bit > 0 && src < N { x[src + 1] << (64 - bit) } else { 0 };
        x[i] = lo | hi;
    }
}

fn shl_guarded(x: &mut Guarded, s: u64) {
    let limb = (s / 64) as usize;
    let bit = (s % 64) as u32;
    if limb > N {
        *x = [0; N + 1];
        return;
    }
    for i in (0..=N).rev() {
        let lo = if i >= limb { x[i - limb] << bit } else { 0 };
        let hi = if bit > 0 && i > limb { x[i - limb - 1] >> (64 - bit) } else { 0 };
        x[i] = lo | hi;
    }
}

fn leading_zeros(x: &Guarded) -> Option<u64> {
    for i in (0..=N).rev() {
        if x[i] != 0 {
            return Some(((N - i) as u64) * 64 + x[i].leading_zeros() as u64);
        }
    }
    None
}

fn guarded(m: &Limbs) -> Guarded {
    let mut g = [0u64; N + 1];
    g[1..].copy_from_slice(m);
    g
}

fn cmp_limbs(a: &[u64], b: &[u64]) -> Ordering {
    for i in (0..a.len()).rev() {
        match a[i].cmp(&b[i]) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

impl F384 {
    pub const ZERO: F384 = F384 { class: Class::Zero, neg: false, exp: 0, mant: [0; N] };
    pub const ONE: F384 = F384 { class: Class::Normal, neg: false, exp: 1, mant: [0, 0, 0, 0, 0, 1 << 63] };
    pub const NAN: F384 = F384 { class: Class::Nan, neg: false, exp: 0, mant: [0; N] };
    pub const INFINITY: F384 = F384 { class: Class::Inf, neg: false, exp: 0, mant: [0; N] };

    fn signed_zero(neg: bool) -> F384 {
        F384 { neg, ..F384::ZERO }
    }

    fn inf(neg: bool) -> F384 {
        F384 { neg, ..F384::INFINITY }
    }

    /// Normalises and rounds a guarded mantissa. `w` must be non-zero.
    fn pack(neg: bool, mut exp: i64, mut w: Guarded) -> F384 {
        let lz = match leading_zeros(&w) {
            Some(lz) => lz,
            None => return F384::signed_zero(neg),
        };
        if lz > 0 {
            shl_guarded(&mut w, lz);
            exp -= lz as i64;
        }
        let mut mant: Limbs = [0; N];
        mant.copy_from_slice(&w[1..]);
        if w[0] >> 63 == 1 {
            let mut carry = true;
            for limb in mant.iter_mut() {
                if !carry {
                    break;
                }
                let (v, c) = limb.overflowing_add(1);
                *limb = v;
                carry = c;
            }
            if carry {
                mant[N - 1] = 1 << 63;
                exp += 1;
            }
        }
        F384 { class: Class::Normal, neg, exp, mant }
    }

    pub fn is_nan(self) -> bool {
        self.class == Class::Nan
    }

    pub fn is_zero_value(self) -> bool {
        self.class == Class::Zero
    }

    pub fn is_sign_negative(self) -> bool {
        self.neg
    }

    /// Multiplies by `2^k` exactly.
    pub fn mul_pow2(self, k: i64) -> F384 {
        match self.class {
            Class::Normal => F384 { exp: self.exp + k, ..self },
            _ => self,
        }
    }

    fn magnitude_cmp(a: &F384, b: &F384) -> Ordering {
        a.exp.cmp(&b.exp).then_with(|| cmp_limbs(&a.mant, &b.mant))
    }

    fn add_signed(a: F384, b: F384, b_neg: bool) -> F384 {
        match (a.class, b.class) {
            (Class::Nan, _) | (_, Class::Nan) => return F384::NAN,
            (Class::Inf, Class::Inf) => {
                return if a.neg == b_neg { a } else { F384::NAN };
            }
            (Class::Inf, _) => return a,
            (_, Class::Inf) => return F384::inf(b_neg),
            (Class::Zero, Class::Zero) => return F384::signed_zero(a.neg && b_neg),
            (Class::Zero, _) => return F384 { neg: b_neg, ..b },
            (_, Class::Zero) => return a,
            _ => {}
        }
        let b = F384 { neg: b_neg, ..b };
        let (x, y) = if F384::magnitude_cmp(&a, &b) == Ordering::Less { (b, a) } else { (a, b) };
        let shift = (x.exp - y.exp) as u64;
        if shift > 64 * (N as u64 + 1) {
            return x;
        }
        let wx = guarded(&x.mant);
        let mut wy = guarded(&y.mant);
        shr_guarded(&mut wy, shift);
        let mut out = [0u64; N + 1];
        if x.neg == y.neg {
            let mut carry = 0u64;
            for i in 0..=N {
                let (s1, c1) = wx[i].overflowing_add(wy[i]);
                let (s2, c2) = s1.overflowing_add(carry);
                out[i] = s2;
                carry = (c1 as u64) + (c2 as u64);
            }
            let mut exp = x.exp;
            if carry != 0 {
                shr_guarded(&mut out, 1);
                out[N] |= 1 << 63;
                exp += 1;
            }
            F384::pack(x.neg, exp, out)
        } else {
            let mut borrow = 0u64;
            for i in 0..=N {
                let (d1, b1) = wx[i].overflowing_sub(wy[i]);
                let (d2, b2) = d1.overflowing_sub(borrow);
                out[i] = d2;
                borrow = (b1 as u64) + (b2 as u64);
            }
            F384::pack(x.neg, x.exp, out)
        }
    }

    fn mul_impl(a: F384, b: F384) -> F384 {
        let neg = a.neg != b.neg;
        match (a.class, b.class) {
            (Class::Nan, _) | (_, Class::Nan) => return F384::NAN,
            (Class::Inf, Class::Zero) | (Class::Zero, Class::Inf) => return F384::NAN,
            (Class::Inf, _) | (_, Class::Inf) => return F384::inf(neg),
            (Class::Zero, _) | (_, Class::Zero) => return F384::signed_zero(neg),
            _ => {}
        }
        let mut p = [0u64; 2 * N];
        for i in 0..N {
            let mut carry: u128 = 0;
            for j in 0..N {
                let t = (a.mant[i] as u128) * (b.mant[j] as u128) + (p[i + j] as u128) + carry;
                p[i + j] = t as u64;
                carry = t >> 64;
            }
            p[i + N] = carry as u64;
        }
        let mut w: Guarded = [0; N + 1];
        w.copy_from_slice(&p[N - 1..]);
        // Bits below the guard limb only matter when the product needs a
        // one-bit renormalisation.
        if w[N] >> 63 == 0 {
            shl_guarded(&mut w, 1);
            w[0] |= p[N - 2] >> 63;
            return F384::pack(neg, a.exp + b.exp - 1, w);
        }
        F384::pack(neg, a.exp + b.exp, w)
    }

    /// Division by a small integer by limb-wise long division.
    pub fn div_u64(self, d: u64) -> F384 {
        assert!(d != 0, "division by zero");
        if self.class != Class::Normal {
            return self;
        }
        let w = guarded(&self.mant);
        let mut q = [0u64; N + 1];
        let mut r: u128 = 0;
        for i in (0..=N).rev() {
            let cur = (r << 64) | w[i] as u128;
            q[i] = (cur / d as u128) as u64;
            r = cur % d as u128;
        }
        F384::pack(self.neg, self.exp, q)
    }

    fn recip(self) -> F384 {
        match self.class {
            Class::Nan => return F384::NAN,
            Class::Zero => return F384::inf(self.neg),
            Class::Inf => return F384::signed_zero(self.neg),
            Class::Normal => {}
        }
        let m = F384 { neg: false, exp: 0, ..self };
        let mut x = F384::from_f64_exact(1.0 / m.to_f64_lossy());
        for _ in 0..3 {
            let e = F384::ONE - m * x;
            x = x + x * e;
        }
        F384 { neg: self.neg, exp: x.exp - self.exp, ..x }
    }

    fn div_impl(a: F384, b: F384) -> F384 {
        match (a.class, b.class) {
            (Class::Nan, _) | (_, Class::Nan) => return F384::NAN,
            (Class::Inf, Class::Inf) | (Class::Zero, Class::Zero) => return F384::NAN,
            _ => {}
        }
        if b.class != Class::Normal || a.class != Class::Normal {
            return a * b.recip();
        }
        let x = b.recip();
        let q = a * x;
        let r = a - b * q;
        q + r * x
    }

    fn from_f64_exact(v: f64) -> F384 {
        if v.is_nan() {
            return F384::NAN;
        }
        if v.is_infinite() {
            return F384::inf(v < 0.0);
        }
        if v == 0.0 {
            return F384::signed_zero(v.is_sign_negative());
        }
        let bits = v.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e2) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
        F384::from_scaled_u64(neg, m, e2)
    }

    /// Builds `m * 2^e2` for a non-zero integer `m`.
    fn from_scaled_u64(neg: bool, m: u64, e2: i64) -> F384 {
        if m == 0 {
            return F384::signed_zero(neg);
        }
        let s = m.leading_zeros();
        let mut mant = [0u64; N];
        mant[N - 1] = m << s;
        F384 { class: Class::Normal, neg, exp: e2 + 64 - s as i64, mant }
    }

    fn to_f64_lossy(self) -> f64 {
        match self.class {
            Class::Nan => f64::NAN,
            Class::Inf => {
                if self.neg {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
            Class::Zero => {
                if self.neg {
                    -0.0
                } else {
                    0.0
                }
            }
            Class::Normal => {
                let top = self.mant[N - 1];
                // Fold the remaining limbs into a sticky bit so the u64 -> f64
                // rounding sees them.
                let sticky = self.mant[..N - 1].iter().any(|&l| l != 0) as u64;
                let v = (top | sticky) as f64;
                let e = self.exp - 64;
                let e = e.clamp(-1_100_000, 1_100_000) as i32;
                let v = libm::scalbn(v, e);
                if self.neg {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Rounds toward zero to an integer value.
    pub fn trunc(self) -> F384 {
        if self.class != Class::Normal {
            return self;
        }
        if self.exp <= 0 {
            return F384::signed_zero(self.neg);
        }
        if self.exp >= MANT_BITS {
            return self;
        }
        let frac_bits = (MANT_BITS - self.exp) as usize;
        let mut mant = self.mant;
        for (i, limb) in mant.iter_mut().enumerate() {
            let lo = i * 64;
            if lo + 64 <= frac_bits {
                *limb = 0;
            } else if lo < frac_bits {
                let keep = frac_bits - lo;
                *limb &= !((1u64 << keep) - 1);
            }
        }
        F384 { mant, ..self }
    }

    fn to_u128_trunc(self) -> Option<u128> {
        match self.class {
            Class::Zero => Some(0),
            Class::Normal if self.exp <= 0 => Some(0),
            Class::Normal if self.exp <= 128 => {
                let top = ((self.mant[N - 1] as u128) << 64) | self.mant[N - 2] as u128;
                Some(top >> (128 - self.exp))
            }
            _ => None,
        }
    }

    fn ln2() -> F384 {
        static LN2: OnceLock<F384> = OnceLock::new();
        *LN2.get_or_init(|| {
            // ln 2 = 2 atanh(1/3) = 2 * sum 3^-(2k+1) / (2k+1)
            let ninth = F384::ONE.div_u64(9);
            let mut power = F384::ONE.div_u64(3);
            let mut sum = power;
            let mut k = 1u64;
            loop {
                power *= ninth;
                let term = power.div_u64(2 * k + 1);
                if term.exp < sum.exp - CUTOFF {
                    break;
                }
                sum += term;
                k += 1;
            }
            sum.mul_pow2(1)
        })
    }

    fn pi_const() -> F384 {
        static PI: OnceLock<F384> = OnceLock::new();
        *PI.get_or_init(|| {
            // Machin: pi = 16 atan(1/5) - 4 atan(1/239)
            fn atan_inv(m: u64) -> F384 {
                let m2 = F384::from_u64_exact(m * m);
                let mut power = F384::ONE.div_u64(m);
                let mut sum = power;
                let mut k = 1u64;
                loop {
                    power /= m2;
                    let term = power.div_u64(2 * k + 1);
                    if term.exp < sum.exp - CUTOFF {
                        break;
                    }
                    if k % 2 == 1 {
                        sum -= term;
                    } else {
                        sum += term;
                    }
                    k += 1;
                }
                sum
            }
            atan_inv(5).mul_pow2(4) - atan_inv(239).mul_pow2(2)
        })
    }

    fn two_over_sqrt_pi() -> F384 {
        static C: OnceLock<F384> = OnceLock::new();
        *C.get_or_init(|| F384::lit(2.0) / F384::pi_const().sqrt_impl())
    }

    fn from_u64_exact(v: u64) -> F384 {
        F384::from_scaled_u64(false, v, 0)
    }

    fn from_i64_exact(v: i64) -> F384 {
        F384::from_scaled_u64(v < 0, v.unsigned_abs(), 0)
    }

    fn sqrt_impl(self) -> F384 {
        match self.class {
            Class::Nan => return F384::NAN,
            Class::Zero => return self,
            Class::Inf if !self.neg => return self,
            _ => {}
        }
        if self.neg {
            return F384::NAN;
        }
        let (m, half) = if self.exp % 2 == 0 {
            (F384 { exp: 0, ..self }, self.exp / 2)
        } else {
            (F384 { exp: 1, ..self }, (self.exp - 1) / 2)
        };
        let mut y = F384::from_f64_exact(1.0 / m.to_f64_lossy().sqrt());
        for _ in 0..3 {
            let e = F384::ONE - m * y * y;
            y = y + (y * e).mul_pow2(-1);
        }
        let s = m * y;
        let s = s + (y * (m - s * s)).mul_pow2(-1);
        s.mul_pow2(half)
    }

    fn exp_impl(self) -> F384 {
        match self.class {
            Class::Nan => return F384::NAN,
            Class::Zero => return F384::ONE,
            Class::Inf => return if self.neg { F384::ZERO } else { self },
            Class::Normal => {}
        }
        let xf = self.to_f64_lossy();
        if xf.abs() > 1e15 {
            return if xf > 0.0 { F384::INFINITY } else { F384::ZERO };
        }
        let k = (xf / std::f64::consts::LN_2).round() as i64;
        let r = self - F384::ln2() * F384::from_i64_exact(k);
        const HALVINGS: i64 = 16;
        let r = r.mul_pow2(-HALVINGS);
        let mut sum = F384::ONE;
        let mut term = F384::ONE;
        let mut i = 1u64;
        loop {
            term = (term * r).div_u64(i);
            if term.class == Class::Zero || term.exp < sum.exp - CUTOFF {
                break;
            }
            sum += term;
            i += 1;
        }
        for _ in 0..HALVINGS {
            sum = sum * sum;
        }
        sum.mul_pow2(k)
    }

    fn ln_impl(self) -> F384 {
        match self.class {
            Class::Nan => return F384::NAN,
            Class::Zero => return F384::inf(true),
            Class::Inf if !self.neg => return self,
            _ => {}
        }
        if self.neg {
            return F384::NAN;
        }
        let m = F384 { exp: 0, ..self };
        let mut y = F384::from_f64_exact(m.to_f64_lossy().ln());
        for _ in 0..3 {
            let ey = y.exp_impl();
            y += ((m - ey) / (m + ey)).mul_pow2(1);
        }
        y + F384::ln2() * F384::from_i64_exact(self.exp)
    }

    fn erf_impl(self) -> F384 {
        match self.class {
            Class::Nan => return F384::NAN,
            Class::Zero => return self,
            Class::Inf => return if self.neg { -F384::ONE } else { F384::ONE },
            Class::Normal => {}
        }
        let ax = self.abs_impl();
        let x2 = ax * ax;
        let value = if ax.to_f64_lossy() <= 10.0 {
            // erf x = 2/sqrt(pi) x e^{-x^2} sum_n (2x^2)^n / (2n+1)!!
            let two_x2 = x2.mul_pow2(1);
            let mut sum = F384::ONE;
            let mut term = F384::ONE;
            let mut n = 1u64;
            loop {
                term = (term * two_x2).div_u64(2 * n + 1);
                if term.exp < sum.exp - CUTOFF {
                    break;
                }
                sum += term;
                n += 1;
            }
            F384::two_over_sqrt_pi() * ax * (-x2).exp_impl() * sum
        } else {
            // erfc x = e^{-x^2} / sqrt(pi) / (x + 1/2 / (x + 1 / (x + 3/2 / ...)))
            let mut t = ax;
            for k in (1..=400u64).rev() {
                t = ax + F384::from_u64_exact(k).mul_pow2(-1) / t;
            }
            let erfc = (F384::two_over_sqrt_pi().mul_pow2(-1) * (-x2).exp_impl()) / t;
            F384::ONE - erfc
        };
        if self.neg {
            -value
        } else {
            value
        }
    }

    fn abs_impl(self) -> F384 {
        F384 { neg: false, ..self }
    }

    fn powi_impl(self, n: i32) -> F384 {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = F384::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            e >>= 1;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }

    /// Scientific notation with `digits` significant decimal digits.
    pub fn to_sci_string(self, digits: usize) -> String {
        match self.class {
            Class::Nan => return "NaN".into(),
            Class::Inf => return if self.neg { "-inf".into() } else { "inf".into() },
            Class::Zero => return if self.neg { "-0".into() } else { "0".into() },
            Class::Normal => {}
        }
        let digits = digits.max(1);
        let ten = F384::from_u64_exact(10);
        let mut y = self.abs_impl();
        let mut k = ((self.exp - 1) as f64 * std::f64::consts::LOG10_2).floor() as i32;
        y = if k >= 0 { y / ten.powi_impl(k) } else { y * ten.powi_impl(-k) };
        while y >= ten {
            y /= ten;
            k += 1;
        }
        while y < F384::ONE {
            y *= ten;
            k -= 1;
        }
        // Round half-up at the last requested digit.
        y += F384::lit(5.0) / ten.powi_impl(digits as i32);
        if y >= ten {
            y /= ten;
            k += 1;
        }
        let mut out = String::with_capacity(digits + 8);
        if self.neg {
            out.push('-');
        }
        for i in 0..digits {
            let d = y.to_u128_trunc().unwrap_or(0).min(9) as u64;
            out.push(char::from(b'0' + d as u8));
            if i == 0 && digits > 1 {
                out.push('.');
            }
            y = (y - F384::from_u64_exact(d)) * ten;
        }
        out.push('e');
        out.push_str(&k.to_string());
        out
    }
}

impl FromStr for F384 {
    type Err = ParseF384Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || ParseF384Error(s.to_string());
        match t.to_ascii_lowercase().as_str() {
            "nan" => return Ok(F384::NAN),
            "inf" | "+inf" | "infinity" => return Ok(F384::INFINITY),
            "-inf" | "-infinity" => return Ok(-F384::INFINITY),
            _ => {}
        }
        let (neg, body) = match t.as_bytes().first() {
            Some(b'-') => (true, &t[1..]),
            Some(b'+') => (false, &t[1..]),
            _ => (false, t),
        };
        let (mantissa, exponent) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], body[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (body, 0),
        };
        if mantissa.is_empty() {
            return Err(err());
        }
        let ten = F384::from_u64_exact(10);
        let mut acc = F384::ZERO;
        let mut scale = exponent;
        let mut seen_point = false;
        let mut seen_digit = false;
        for c in mantissa.chars() {
            match c {
                '.' if !seen_point => seen_point = true,
                '0'..='9' => {
                    seen_digit = true;
                    acc = acc * ten + F384::from_u64_exact(c as u64 - '0' as u64);
                    if seen_point {
                        scale -= 1;
                    }
                }
                _ => return Err(err()),
            }
        }
        if !seen_digit {
            return Err(err());
        }
        let v = if scale >= 0 { acc * ten.powi_impl(scale) } else { acc / ten.powi_impl(-scale) };
        Ok(if neg { -v } else { v })
    }
}

impl fmt::Display for F384 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().map(|p| p + 1).unwrap_or(40);
        f.pad(&self.to_sci_string(digits))
    }
}

impl fmt::Debug for F384 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F384({})", self.to_sci_string(40))
    }
}

impl PartialEq for F384 {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for F384 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.is_nan() || other.is_nan() {
            return None;
        }
        let sign = |v: &F384| -> i8 {
            match v.class {
                Class::Zero => 0,
                _ if v.neg => -1,
                _ => 1,
            }
        };
        let (sa, sb) = (sign(self), sign(other));
        if sa != sb {
            return Some(sa.cmp(&sb));
        }
        if sa == 0 {
            return Some(Ordering::Equal);
        }
        let mag = match (self.class, other.class) {
            (Class::Inf, Class::Inf) => Ordering::Equal,
            (Class::Inf, _) => Ordering::Greater,
            (_, Class::Inf) => Ordering::Less,
            _ => F384::magnitude_cmp(self, other),
        };
        Some(if sa > 0 { mag } else { mag.reverse() })
    }
}

impl Default for F384 {
    fn default() -> Self {
        F384::ZERO
    }
}

impl Neg for F384 {
    type Output = F384;
    fn neg(self) -> F384 {
        match self.class {
            Class::Nan => self,
            _ => F384 { neg: !self.neg, ..self },
        }
    }
}

impl Add for F384 {
    type Output = F384;
    fn add(self, rhs: F384) -> F384 {
        F384::add_signed(self, rhs, rhs.neg)
    }
}

impl Sub for F384 {
    type Output = F384;
    fn sub(self, rhs: F384) -> F384 {
        F384::add_signed(self, rhs, !rhs.neg)
    }
}

impl Mul for F384 {
    type Output = F384;
    fn mul(self, rhs: F384) -> F384 {
        F384::mul_impl(self, rhs)
    }
}

impl Div for F384 {
    type Output = F384;
    fn div(self, rhs: F384) -> F384 {
        F384::div_impl(self, rhs)
    }
}

impl Rem for F384 {
    type Output = F384;
    fn rem(self, rhs: F384) -> F384 {
        self - (self / rhs).trunc() * rhs
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for F384 {
            fn $m(&mut self, rhs: F384) {
                *self = *self $op rhs;
            }
        }
    };
}

assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);
assign_op!(RemAssign, rem_assign, %);

impl Sum for F384 {
    fn sum<I: Iterator<Item = F384>>(iter: I) -> F384 {
        iter.fold(F384::ZERO, |a, b| a + b)
    }
}

impl Zero for F384 {
    fn zero() -> Self {
        F384::ZERO
    }
    fn is_zero(&self) -> bool {
        self.class == Class::Zero
    }
}

impl One for F384 {
    fn one() -> Self {
        F384::ONE
    }
}

impl Num for F384 {
    type FromStrRadixErr = ParseF384Error;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        if radix != 10 {
            return Err(ParseF384Error(format!("radix {radix} unsupported")));
        }
        s.parse()
    }
}

impl ToPrimitive for F384 {
    fn to_i64(&self) -> Option<i64> {
        let mag = self.abs_impl().to_u128_trunc()?;
        if self.neg && self.class != Class::Zero {
            if mag <= i64::MAX as u128 + 1 {
                Some((mag as i128).wrapping_neg() as i64)
            } else {
                None
            }
        } else {
            i64::try_from(mag).ok()
        }
    }

    fn to_u64(&self) -> Option<u64> {
        if self.neg && self.class == Class::Normal && self.exp > 0 {
            return None;
        }
        u64::try_from(self.to_u128_trunc()?).ok()
    }

    fn to_f64(&self) -> Option<f64> {
        Some(self.to_f64_lossy())
    }
}

impl FromPrimitive for F384 {
    fn from_i64(n: i64) -> Option<Self> {
        Some(F384::from_i64_exact(n))
    }

    fn from_u64(n: u64) -> Option<Self> {
        Some(F384::from_u64_exact(n))
    }

    fn from_f64(n: f64) -> Option<Self> {
        Some(F384::from_f64_exact(n))
    }
}

impl NumCast for F384 {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        let f = n.to_f64()?;
        if f.fract() == 0.0 && f.abs() > 9.0e15 {
            if let Some(i) = n.to_i64() {
                return Some(F384::from_i64_exact(i));
            }
            if let Some(u) = n.to_u64() {
                return Some(F384::from_u64_exact(u));
            }
        }
        Some(F384::from_f64_exact(f))
    }
}

impl From<f64> for F384 {
    fn from(v: f64) -> Self {
        F384::from_f64_exact(v)
    }
}

impl Real for F384 {
    const NAME: &'static str = "f384";

    fn sqrt(self) -> Self {
        self.sqrt_impl()
    }
    fn exp(self) -> Self {
        self.exp_impl()
    }
    fn ln(self) -> Self {
        self.ln_impl()
    }
    fn erf(self) -> Self {
        self.erf_impl()
    }
    fn abs(self) -> Self {
        self.abs_impl()
    }
    fn powi(self, n: i32) -> Self {
        self.powi_impl(n)
    }
    fn is_finite(self) -> bool {
        matches!(self.class, Class::Zero | Class::Normal)
    }
    fn pi() -> Self {
        F384::pi_const()
    }
    fn epsilon() -> Self {
        F384::ONE.mul_pow2(1 - MANT_BITS)
    }
    fn lit(v: f64) -> Self {
        F384::from_f64_exact(v)
    }
    fn as_f64(self) -> f64 {
        self.to_f64_lossy()
    }
}
