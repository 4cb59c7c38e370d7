//! Arithmetic over GF(2^8) with the reduction polynomial
//! x^8 + x^4 + x^3 + x^2 + 1 (0x11D) and generator alpha = 0x02.
//!
//! Multiplication and inversion go through log/antilog tables built at
//! compile time. The antilog table is doubled so products of two logs
//! never need an explicit `mod 255`.

/// Reduction polynomial, including the x^8 term.
pub const POLY: u16 = 0x11D;

/// Multiplicative generator of the field.
pub const GENERATOR: u8 = 0x02;

/// Field order minus one: the order of the multiplicative group.
pub const GROUP_ORDER: usize = 255;

const fn build_tables() -> ([u8; 510], [u8; 256]) {
    let mut exp = [0u8; 510];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        exp[i + 255] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    (exp, log)
}

const TABLES: ([u8; 510], [u8; 256]) = build_tables();
const EXP: [u8; 510] = TABLES.0;
const LOG: [u8; 256] = TABLES.1;

/// An element of GF(2^8). Addition is XOR; multiplication is table-driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    /// alpha^i for any exponent (reduced mod 255).
    #[inline]
    pub fn alpha_pow(i: i32) -> Gf256 {
        let e = i.rem_euclid(GROUP_ORDER as i32) as usize;
        Gf256(EXP[e])
    }

    /// Discrete log base alpha. Zero has no logarithm.
    #[inline]
    pub fn log(self) -> Option<u8> {
        if self.0 == 0 {
            None
        } else {
            Some(LOG[self.0 as usize])
        }
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Multiplicative inverse. Zero has none.
    #[inline]
    pub fn inv(self) -> Option<Gf256> {
        if self.0 == 0 {
            None
        } else {
            Some(Gf256(EXP[255 - LOG[self.0 as usize] as usize]))
        }
    }

    /// self^e with e taken as an ordinary integer exponent.
    pub fn pow(self, e: u32) -> Gf256 {
        if e == 0 {
            return Gf256::ONE;
        }
        if self.0 == 0 {
            return Gf256::ZERO;
        }
        let l = LOG[self.0 as usize] as u64 * e as u64;
        Gf256(EXP[(l % GROUP_ORDER as u64) as usize])
    }
}

impl std::ops::Add for Gf256 {
    type Output = Gf256;
    #[inline]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl std::ops::AddAssign for Gf256 {
    #[inline]
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

// Characteristic 2: subtraction is addition.
impl std::ops::Sub for Gf256 {
    type Output = Gf256;
    #[inline]
    fn sub(self, rhs: Gf256) -> Gf256 {
        self + rhs
    }
}

impl std::ops::Mul for Gf256 {
    type Output = Gf256;
    #[inline]
    fn mul(self, rhs: Gf256) -> Gf256 {
        if self.0 == 0 || rhs.0 == 0 {
            return Gf256::ZERO;
        }
        Gf256(EXP[LOG[self.0 as usize] as usize + LOG[rhs.0 as usize] as usize])
    }
}

impl std::ops::MulAssign for Gf256 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf256) {
        *self = *self * rhs;
    }
}

impl std::fmt::Display for Gf256 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:02x}", self.0)
    }
}
