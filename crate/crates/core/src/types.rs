//! Method of types: exact type-class counting, rounding of couplings to
//! joint types, and Monte Carlo for random constant-composition codebooks.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::measure::{dot, DiscreteMeasure};

/// Largest blocklength for exact multinomials.
pub const MAX_BLOCKLENGTH: u64 = 1 << 20;

/// Default cap on the codebook size `L`.
pub const DEFAULT_L_CAP: u64 = 1_000_000;

/// Integer counts over an alphabet, summing to the blocklength `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeSpec {
    alphabet: Vec<Vec<f64>>,
    counts: Vec<u64>,
    n: u64,
}

impl TypeSpec {
    pub fn new(alphabet: Vec<Vec<f64>>, counts: Vec<u64>) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::EmptySupport);
        }
        if alphabet.len() != counts.len() {
            return Err(Error::LengthMismatch {
                points: alphabet.len(),
                weights: counts.len(),
            });
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "blocklength must be positive".into(),
            ));
        }
        Ok(TypeSpec {
            alphabet,
            counts,
            n,
        })
    }

    pub fn alphabet(&self) -> &[Vec<f64>] {
        &self.alphabet
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.alphabet[0].len()
    }

    /// Empirical mean `(1/N) sum_i counts_i x_i`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (x, &c) in self.alphabet.iter().zip(&self.counts) {
            for (mk, xk) in m.iter_mut().zip(x) {
                *mk += c as f64 * xk;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        let w = self
            .counts
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect();
        DiscreteMeasure::new(self.alphabet.clone(), w)
    }
}

/// The type of `mu` at blocklength `n`, if every `n * weight` is an integer
/// within `1e-9`.
pub fn is_rational(mu: &DiscreteMeasure, n: u64) -> Option<TypeSpec> {
    if n == 0 {
        return None;
    }
    let mut counts = Vec::with_capacity(mu.len());
    for &w in mu.weights() {
        let x = w * n as f64;
        let r = x.round();
        if (x - r).abs() > 1e-9 {
            return None;
        }
        counts.push(r as u64);
    }
    TypeSpec::new(mu.points().to_vec(), counts).ok()
}

/// Integer joint counts on `rows x cols`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointTypeSpec {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
    n: u64,
}

impl JointTypeSpec {
    pub fn new(rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptySupport);
        }
        if counts.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "{} counts for a {rows}x{cols} table",
                counts.len()
            )));
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "blocklength must be positive".into(),
            ));
        }
        Ok(JointTypeSpec {
            rows,
            cols,
            counts,
            n,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn row_counts(&self) -> Vec<u64> {
        self.counts
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn col_counts(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// `I(X; Y)` of the joint type, in nats.
    pub fn mutual_information(&self) -> f64 {
        let (r, c) = (self.row_counts(), self.col_counts());
        let n = self.n as f64;
        let mut total = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let k = self.get(i, j);
                if k > 0 {
                    let k = k as f64;
                    total += k / n * (k * n / (r[i] as f64 * c[j] as f64)).ln();
                }
            }
        }
        total.max(0.0)
    }
}

/// `(sum c)! / prod(c!)`, exactly.
pub fn multinomial(counts: &[u64]) -> Result<BigUint> {
    let n: u64 = counts.iter().sum();
    if n > MAX_BLOCKLENGTH {
        return Err(Error::Overflow {
            n,
            limit: MAX_BLOCKLENGTH,
        });
    }
    // product of binomials C(s + c, c), each built by exact running division
    let mut out = BigUint::one();
    let mut s = 0u64;
    for &c in counts {
        for k in 1..=c {
            out *= s + k;
            out /= k;
        }
        s += c;
    }
    Ok(out)
}

/// Number of sequences with type `t`.
pub fn type_class_size(t: &TypeSpec) -> Result<BigUint> {
    multinomial(&t.counts)
}

/// Natural log of a big integer, accurate to double precision.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().map_or(f64::INFINITY, f64::ln);
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn expand_counts(counts: &[u64]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
        .collect()
}

/// A uniformly random sequence of alphabet indices with type `t`.
pub fn sample_type_sequence(t: &TypeSpec, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq = expand_counts(&t.counts);
    seq.shuffle(&mut rng);
    seq
}

/// Exact conditional type count with the log-domain comparison against
/// `(N+1)^{-|X||Y|} e^{-NI} <= count / |C| <= (N+1)^{|Y|} e^{-NI}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalCount {
    /// `|{y^N : (x^N, y^N) has the joint type}|`.
    #[serde(serialize_with = "decimal")]
    pub count: BigUint,
    /// Size of the type class of the column marginal.
    #[serde(serialize_with = "decimal")]
    pub class_size: BigUint,
    pub mutual_info: f64,
    pub log_ratio: f64,
    pub log_lower: f64,
    pub log_upper: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// Serializes a big integer as a decimal string.
pub fn decimal<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_str_radix(10))
}

/// Counts the `y^N` whose joint type with `x_seq` is `j`.
pub fn conditional_type_count(j: &JointTypeSpec, x_seq: &[usize]) -> Result<ConditionalCount> {
    if x_seq.len() as u64 != j.n {
        return Err(Error::TypeMismatch(format!(
            "sequence length {} differs from N = {}",
            x_seq.len(),
            j.n
        )));
    }
    let mut seen = vec![0u64; j.rows];
    for &x in x_seq {
        if x >= j.rows {
            return Err(Error::TypeMismatch(format!(
                "symbol {x} outside the row alphabet"
            )));
        }
        seen[x] += 1;
    }
    if seen != j.row_counts() {
        return Err(Error::TypeMismatch(
            "sequence type differs from the row marginal".into(),
        ));
    }
    // positions of each x-symbol are filled independently
    let mut count = BigUint::one();
    for row in j.counts.chunks(j.cols) {
        count *= multinomial(row)?;
    }
    let class_size = multinomial(&j.col_counts())?;
    let n = j.n as f64;
    let mi = j.mutual_information();
    let log_ratio = ln_big(&count) - ln_big(&class_size);
    let ln_n1 = (n + 1.0).ln();
    let log_lower = -((j.rows * j.cols) as f64) * ln_n1 - n * mi;
    let log_upper = j.cols as f64 * ln_n1 - n * mi;
    Ok(ConditionalCount {
        lower_holds: log_lower <= log_ratio,
        upper_holds: log_ratio <= log_upper,
        count,
        class_size,
        mutual_info: mi,
        log_ratio,
        log_lower,
        log_upper,
    })
}

/// Fixed-point scale for fractional parts in [`cycle_round`].
const FRACTION_SCALE: i64 = 1 << 30;
/// Fractional parts below this are treated as exact integers.
const SNAP: f64 = 1e-7;

/// Rounds a real coupling `p` (row-major, `rows x cols`) to a joint type at
/// blocklength `n` with the same marginal counts and
/// `max |Q - P| <= 1 / n`.
///
/// Fractional parts of `n P` are moved around cycles of their bipartite
/// support graph until every cell is integral. Each cycle starts at the
/// first fractional cell in row-major order and always takes the first
/// available fractional cell, so the result is deterministic.
pub fn cycle_round(p: &[f64], rows: usize, cols: usize, n: u64) -> Result<JointTypeSpec> {
    if rows == 0 || cols == 0 || p.len() != rows * cols {
        return Err(Error::InvalidArgument(format!(
            "{} entries for a {rows}x{cols} table",
            p.len()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "blocklength must be positive".into(),
        ));
    }
    if let Some(i) = p.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::NonFinite { index: i });
    }
    let nf = n as f64;
    let m: Vec<f64> = p.iter().map(|x| x * nf).collect();
    let integral = |axis: &'static str, index: usize, v: f64| -> Result<i64> {
        let r = v.round();
        if (v - r).abs() > 1e-9 {
            return Err(Error::MarginalNotInteger {
                axis,
                index,
                value: v,
            });
        }
        Ok(r as i64)
    };
    let mut row_target = Vec::with_capacity(rows);
    for i in 0..rows {
        row_target.push(integral(
            "row",
            i,
            m[i * cols..(i + 1) * cols].iter().sum(),
        )?);
    }
    let mut col_target = Vec::with_capacity(cols);
    for j in 0..cols {
        col_target.push(integral(
            "col",
            j,
            (0..rows).map(|i| m[i * cols + j]).sum(),
        )?);
    }
    if row_target.iter().sum::<i64>() != n as i64 {
        return Err(Error::InvalidArgument(format!(
            "table does not sum to N = {n}"
        )));
    }

    let mut base = vec![0i64; rows * cols];
    let mut frac = vec![0i64; rows * cols];
    for (k, &v) in m.iter().enumerate() {
        let mut fl = v.floor();
        let mut f = v - fl;
        if f < SNAP {
            f = 0.0;
        } else if f > 1.0 - SNAP {
            fl += 1.0;
            f = 0.0;
        }
        base[k] = fl as i64;
        frac[k] = (f * FRACTION_SCALE as f64).round() as i64;
    }
    repair_margins(&mut frac, &base, &row_target, &col_target, rows, cols)?;
    cancel_cycles(&mut frac, rows, cols)?;

    let counts: Vec<u64> = base
        .iter()
        .zip(&frac)
        .map(|(b, f)| (b + f / FRACTION_SCALE) as u64)
        .collect();
    JointTypeSpec::new(rows, cols, counts)
}

/// Makes fixed-point row and column sums of `frac` exact multiples of the
/// scale by adjusting cells along a spanning forest of the fractional
/// support.
fn repair_margins(
    frac: &mut [i64],
    base: &[i64],
    row_target: &[i64],
    col_target: &[i64],
    rows: usize,
    cols: usize,
) -> Result<()> {
    // node ids: rows 0..rows, columns rows..rows+cols
    let mut residual = vec![0i64; rows + cols];
    for i in 0..rows {
        let have: i64 = (0..cols).map(|j| base[i * cols + j]).sum();
        residual[i] = (row_target[i] - have) * FRACTION_SCALE
            - (0..cols).map(|j| frac[i * cols + j]).sum::<i64>();
    }
    for j in 0..cols {
        let have: i64 = (0..rows).map(|i| base[i * cols + j]).sum();
        residual[rows + j] = (col_target[j] - have) * FRACTION_SCALE
            - (0..rows).map(|i| frac[i * cols + j]).sum::<i64>();
    }
    if residual.iter().all(|&r| r == 0) {
        return Ok(());
    }
    let neighbours = |v: usize, frac: &[i64]| -> Vec<(usize, usize)> {
        if v < rows {
            (0..cols)
                .filter(|&j| frac[v * cols + j] > 0)
                .map(|j| (rows + j, v * cols + j))
                .collect()
        } else {
            let j = v - rows;
            (0..rows)
                .filter(|&i| frac[i * cols + j] > 0)
                .map(|i| (i, i * cols + j))
                .collect()
        }
    };
    let mut visited = vec![false; rows + cols];
    for root in 0..rows + cols {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        // BFS order with parent edges
        let mut order = vec![root];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; rows + cols];
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for (w, cell) in neighbours(v, frac) {
                if !visited[w] {
                    visited[w] = true;
                    parent[w] = Some((v, cell));
                    order.push(w);
                }
            }
        }
        for &v in order.iter().skip(1).rev() {
            let (u, cell) = parent[v].expect("non-root nodes have parents");
            let delta = residual[v];
            frac[cell] += delta;
            residual[v] = 0;
            residual[u] -= delta;
            if frac[cell] < 0 || frac[cell] > FRACTION_SCALE {
                return Err(Error::InvalidArgument(
                    "fractional parts too inaccurate to round".into(),
                ));
            }
        }
        if residual[root] != 0 {
            return Err(Error::InvalidArgument(
                "marginals of the fractional part do not balance".into(),
            ));
        }
    }
    Ok(())
}

/// Pushes fixed-point fractional mass around alternating cycles until every
/// cell is `0` or the full scale.
fn cancel_cycles(frac: &mut [i64], rows: usize, cols: usize) -> Result<()> {
    let open = |v: i64| v > 0 && v < FRACTION_SCALE;
    let mut guard = 0;
    while let Some(start) = frac.iter().position(|&v| open(v)) {
        guard += 1;
        if guard > 4 * rows * cols + 4 {
            return Err(Error::InvalidArgument(
                "cycle cancelling did not terminate".into(),
            ));
        }
        // walk rows (ids < rows) and columns (ids >= rows) along open cells,
        // never leaving by the cell just used, until a node repeats
        let mut nodes = vec![start / cols];
        let mut edges: Vec<usize> = Vec::new();
        let mut at = vec![usize::MAX; rows + cols];
        at[start / cols] = 0;
        let mut edge = start;
        let cycle = loop {
            let v = *nodes.last().expect("nonempty walk");
            let w = if v < rows {
                rows + edge % cols
            } else {
                edge / cols
            };
            edges.push(edge);
            if at[w] != usize::MAX {
                break edges[at[w]..].to_vec();
            }
            at[w] = nodes.len();
            nodes.push(w);
            let next = if w < rows {
                (0..cols)
                    .map(|j| w * cols + j)
                    .find(|&c| c != edge && open(frac[c]))
            } else {
                let j = w - rows;
                (0..rows)
                    .map(|i| i * cols + j)
                    .find(|&c| c != edge && open(frac[c]))
            };
            edge = next.ok_or_else(|| {
                Error::InvalidArgument(
                    "open cell without a partner; marginals are not integral".into(),
                )
            })?;
        };
        debug_assert!(cycle.len() % 2 == 0);
        let delta = cycle
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if k % 2 == 0 {
                    FRACTION_SCALE - frac[c]
                } else {
                    frac[c]
                }
            })
            .min()
            .expect("nonempty cycle");
        for (k, &c) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                frac[c] += delta;
            } else {
                frac[c] -= delta;
            }
        }
    }
    Ok(())
}

/// `e^{-mu} (e mu / t)^t` with `mu = L p`.
///
/// Bounds `P[S >= t]` for `t >= mu` and `P[S <= t]` for `t <= mu`, where `S`
/// is Binomial(`L`, `p`).
pub fn chernoff_binomial_bound(p: f64, l: u64, t: f64) -> f64 {
    assert!(t > 0.0, "t must be positive");
    let mu = l as f64 * p;
    if mu <= 0.0 {
        return 0.0;
    }
    (-mu + t * (1.0 + mu.ln() - t.ln())).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiftingEstimate {
    pub n: u64,
    pub rate: f64,
    /// Codebook size `floor(exp(N R))`.
    pub l: u64,
    pub trials: usize,
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo estimate of `E max_{z in A} (1/N) <Y^N, z^N>` where `Y^N` is
/// uniform on the type class of `gamma_t` and `A` holds `floor(exp(N R))`
/// independent uniform draws from the type class of `mu_t`.
///
/// Trial `k` draws from a ChaCha8 stream `k` keyed by `seed`, so results do
/// not depend on `exec`.
pub fn simulate_lifting(
    gamma_t: &TypeSpec,
    mu_t: &TypeSpec,
    rate: f64,
    trials: usize,
    seed: u64,
    l_cap: u64,
    exec: Exec,
) -> Result<LiftingEstimate> {
    if gamma_t.n != mu_t.n {
        return Err(Error::TypeMismatch(format!(
            "blocklengths differ: {} vs {}",
            gamma_t.n, mu_t.n
        )));
    }
    if gamma_t.dim() != mu_t.dim() {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: gamma_t.dim(),
            found: mu_t.dim(),
        });
    }
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::InvalidArgument(format!("rate {rate} must be >= 0")));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let n = gamma_t.n;
    let size = (n as f64 * rate).exp().floor();
    if size > l_cap as f64 {
        return Err(Error::CodebookTooLarge { size, cap: l_cap });
    }
    let l = size as u64;
    let table: Vec<Vec<f64>> = gamma_t
        .alphabet
        .iter()
        .map(|y| mu_t.alphabet.iter().map(|z| dot(y, z)).collect())
        .collect();
    let y_base = expand_counts(&gamma_t.counts);
    let z_base = expand_counts(&mu_t.counts);

    let values: Vec<f64> = exec.map_range(trials, |trial| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let mut y = y_base.clone();
        y.shuffle(&mut rng);
        let mut z = z_base.clone();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..l {
            z.shuffle(&mut rng);
            let s: f64 = y.iter().zip(&z).map(|(&a, &b)| table[a][b]).sum();
            best = best.max(s);
        }
        best / n as f64
    });
    let mean = values.iter().sum::<f64>() / trials as f64;
    let std_error = if trials > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    Ok(LiftingEstimate {
        n,
        rate,
        l,
        trials,
        mean,
        std_error,
    })
}
