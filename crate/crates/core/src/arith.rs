//! Integer number theory primitives: factorization, the classical
//! multiplicative functions and modular inverses.
//!
//! Factorization trial-divides by the primes below 2^20 and hands any
//! remaining cofactor to Miller–Rabin and Pollard's rho. Every function is
//! pure and can be called from any number of threads.

use std::sync::OnceLock;

use thiserror::Error;

/// Largest input accepted by [`factorize`].
pub const FACTOR_LIMIT: u64 = 1 << 63;

const TRIAL_BOUND: u32 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("{0} is outside the supported range [1, 2^63]")]
    OutOfRange(u64),
    #[error("{x} is not invertible modulo {modulus}")]
    NotInvertible { x: i64, modulus: u64 },
}

/// Prime factorization as an increasing list of `(prime, exponent)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Factorization {
    prime_powers: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn prime_powers(&self) -> &[(u64, u32)] {
        &self.prime_powers
    }

    pub fn is_unit(&self) -> bool {
        self.prime_powers.is_empty()
    }

    /// Multiplies the factorization back out.
    pub fn value(&self) -> u64 {
        self.prime_powers
            .iter()
            .map(|&(p, e)| p.pow(e))
            .product()
    }

    pub fn num_divisors(&self) -> u64 {
        self.prime_powers.iter().map(|&(_, e)| e as u64 + 1).product()
    }

    pub fn sum_divisors(&self) -> u128 {
        self.prime_powers
            .iter()
            .map(|&(p, e)| {
                let p = p as u128;
                // (p^(e+1) - 1) / (p - 1) without overflow for 64-bit inputs
                (0..=e).fold((0u128, 1u128), |(s, pk), _| (s + pk, pk * p)).0
            })
            .product()
    }

    pub fn totient(&self) -> u64 {
        self.prime_powers
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    pub fn mobius(&self) -> i8 {
        if self.prime_powers.iter().any(|&(_, e)| e > 1) {
            0
        } else if self.prime_powers.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// All positive divisors in increasing order.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.prime_powers {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }
}

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let n = TRIAL_BOUND as usize;
        let mut composite = vec![false; n + 1];
        let mut primes = Vec::new();
        for i in 2..=n {
            if !composite[i] {
                primes.push(i as u32);
                let mut j = i * i;
                while j <= n {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        primes
    })
}

/// Factorizes `n` exactly. Inputs must lie in `[1, 2^63]`.
pub fn factorize(n: u64) -> Result<Factorization, ArithError> {
    if n == 0 || n > FACTOR_LIMIT {
        return Err(ArithError::OutOfRange(n));
    }
    let mut rest = n;
    let mut prime_powers = Vec::new();
    for &p in small_primes() {
        let p = p as u64;
        if p * p > rest {
            break;
        }
        if rest % p == 0 {
            let mut e = 0;
            while rest % p == 0 {
                rest /= p;
                e += 1;
            }
            prime_powers.push((p, e));
        }
    }
    if rest > 1 {
        let bound = TRIAL_BOUND as u64;
        if rest < bound * bound {
            prime_powers.push((rest, 1));
        } else {
            let mut large = Vec::new();
            split_large(rest, &mut large);
            large.sort_unstable();
            for p in large {
                match prime_powers.last_mut() {
                    Some((q, e)) if *q == p => *e += 1,
                    _ => prime_powers.push((p, 1)),
                }
            }
        }
    }
    Ok(Factorization { prime_powers })
}

fn split_large(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_large(d, out);
    split_large(n / d, out);
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin for all 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &p in &WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// Brent's variant; `n` is odd, composite and free of small factors.
fn pollard_rho(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut g) = (2u64, 2u64, 1u64);
        let mut q = 1u64;
        let mut r = 1u64;
        let mut ys = 0;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..(128.min(r - k)) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += 128;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn gcd_i64(a: i64, b: i64) -> u64 {
    gcd(a.unsigned_abs(), b.unsigned_abs())
}

/// Sum of the positive divisors of `n`.
pub fn sigma(n: u64) -> Result<u128, ArithError> {
    Ok(factorize(n)?.sum_divisors())
}

/// Number of positive divisors of `n`.
pub fn tau(n: u64) -> Result<u64, ArithError> {
    Ok(factorize(n)?.num_divisors())
}

pub fn totient(n: u64) -> Result<u64, ArithError> {
    Ok(factorize(n)?.totient())
}

pub fn mobius(n: u64) -> Result<i8, ArithError> {
    Ok(factorize(n)?.mobius())
}

/// Inverse of `x` modulo `modulus`, reduced into `[0, modulus)`.
pub fn mod_inverse(x: i64, modulus: u64) -> Result<u64, ArithError> {
    if modulus == 0 {
        return Err(ArithError::NotInvertible { x, modulus });
    }
    if modulus == 1 {
        return Ok(0);
    }
    let m = modulus as i128;
    let (mut old_r, mut r) = ((x as i128).rem_euclid(m), m);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(ArithError::NotInvertible { x, modulus });
    }
    Ok(old_s.rem_euclid(m) as u64)
}

/// Smallest-prime-factor table on `[0, n]`; entry 0 and 1 are 0.
pub fn smallest_prime_factors(n: usize) -> Vec<u32> {
    let mut spf = vec![0u32; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

/// Euler's totient for every integer in `[0, n]` (entry 0 is 0).
pub fn totient_table(n: usize) -> Vec<u64> {
    let mut phi: Vec<u64> = (0..=n as u64).collect();
    for p in 2..=n {
        if phi[p] == p as u64 {
            let mut k = p;
            while k <= n {
                phi[k] -= phi[k] / p as u64;
                k += p;
            }
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn divisors_direct(n: u64) -> Vec<u64> {
        (1..=n).filter(|d| n % d == 0).collect()
    }

    #[test]
    fn factorize_examples() {
        assert!(factorize(1).unwrap().is_unit());
        assert_eq!(factorize(12).unwrap().prime_powers(), &[(2, 2), (3, 1)]);
        assert_eq!(factorize(97).unwrap().prime_powers(), &[(97, 1)]);
        assert_eq!(factorize(0), Err(ArithError::OutOfRange(0)));
        assert_eq!(
            factorize(FACTOR_LIMIT + 1),
            Err(ArithError::OutOfRange(FACTOR_LIMIT + 1))
        );
    }

    #[test]
    fn factorize_large_inputs() {
        // 2^61 - 1 is prime; (2^31 - 1)(2^32 - 5) is a product of two large primes
        let m61 = (1u64 << 61) - 1;
        assert_eq!(factorize(m61).unwrap().prime_powers(), &[(m61, 1)]);
        let p = (1u64 << 31) - 1;
        let q = (1u64 << 32) - 5;
        assert_eq!(factorize(p * q).unwrap().prime_powers(), &[(p, 1), (q, 1)]);
        let r = 1_000_003u64;
        assert_eq!(
            factorize(r * r * 999_983).unwrap().prime_powers(),
            &[(999_983, 1), (r, 2)]
        );
        assert_eq!(factorize(FACTOR_LIMIT).unwrap().prime_powers(), &[(2, 63)]);
    }

    #[test]
    fn function_examples() {
        assert_eq!(sigma(1).unwrap(), 1);
        assert_eq!(sigma(6).unwrap(), 12);
        assert_eq!(sigma(4).unwrap(), 7);
        assert_eq!(mobius(1).unwrap(), 1);
        assert_eq!(mobius(4).unwrap(), 0);
        assert_eq!(mobius(6).unwrap(), 1);
        assert_eq!(mod_inverse(3, 7).unwrap(), 5);
        for c in 2..50 {
            assert_eq!(mod_inverse(1, c).unwrap(), 1);
        }
        assert_eq!(
            mod_inverse(2, 4),
            Err(ArithError::NotInvertible { x: 2, modulus: 4 })
        );
        assert_eq!(mod_inverse(-3, 7).unwrap(), 2);
    }

    #[test]
    fn multiplicative_functions_match_enumeration() {
        let spf = smallest_prime_factors(100_000);
        let phi = totient_table(100_000);
        for n in 1..=100_000u64 {
            let f = factorize(n).unwrap();
            assert_eq!(f.value(), n);
            if n <= 3000 {
                let divs = divisors_direct(n);
                assert_eq!(f.divisors(), divs);
                assert_eq!(f.num_divisors(), divs.len() as u64);
                assert_eq!(f.sum_divisors(), divs.iter().map(|&d| d as u128).sum());
                let coprime = (1..=n).filter(|&k| gcd(k, n) == 1).count() as u64;
                assert_eq!(f.totient(), coprime);
            }
            assert_eq!(f.totient(), phi[n as usize]);
            // mobius from the smallest-prime-factor chain
            let (mut m, mut mu, mut last) = (n, 1i8, 0u32);
            while m > 1 {
                let p = spf[m as usize];
                if p == last {
                    mu = 0;
                    break;
                }
                mu = -mu;
                last = p;
                m /= p as u64;
            }
            assert_eq!(f.mobius(), mu, "mu({n})");
            if n > 1 {
                assert_eq!(f.prime_powers()[0].0, spf[n as usize] as u64);
            }
        }
    }

    #[test]
    fn mod_inverse_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 10_000 {
            let c: u64 = rng.gen_range(2..1_000_000_000);
            let x: i64 = rng.gen_range(-1_000_000_000_000..1_000_000_000_000);
            if gcd_i64(x, c as i64) != 1 {
                continue;
            }
            let y = mod_inverse(x, c).unwrap();
            assert!(y < c);
            assert_eq!(((x as i128).rem_euclid(c as i128) * y as i128) % c as i128, 1);
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn sigma_and_mobius_multiplicative(a in 1u64..1_000_000, b in 1u64..1_000_000) {
            prop_assume!(gcd(a, b) == 1);
            prop_assert_eq!(sigma(a * b).unwrap(), sigma(a).unwrap() * sigma(b).unwrap());
            prop_assert_eq!(mobius(a * b).unwrap(), mobius(a).unwrap() * mobius(b).unwrap());
        }
    }
}
