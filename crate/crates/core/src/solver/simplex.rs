//! Exact feasibility of linear systems over non-negative rationals.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, Zero};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rel {
    Le,
    Eq,
    Ge,
}

/// `Σ coeffs · x  rel  rhs` over columns `0..n`.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub coeffs: Vec<(usize, i64)>,
    pub rel: Rel,
    pub rhs: i64,
}

fn rat(x: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// Ordered field arithmetic; `None` signals overflow.
trait Field: Clone + Zero + One + PartialOrd + Signed {
    fn from_i64(x: i64) -> Self;
    fn add_(&self, o: &Self) -> Option<Self>;
    fn sub_(&self, o: &Self) -> Option<Self>;
    fn mul_(&self, o: &Self) -> Option<Self>;
    fn div_(&self, o: &Self) -> Option<Self>;
    fn to_big(&self) -> BigRational;
}

impl Field for BigRational {
    fn from_i64(x: i64) -> Self {
        rat(x)
    }
    fn add_(&self, o: &Self) -> Option<Self> {
        Some(self + o)
    }
    fn sub_(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn mul_(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn div_(&self, o: &Self) -> Option<Self> {
        Some(self / o)
    }
    fn to_big(&self) -> BigRational {
        self.clone()
    }
}

type Small = Ratio<i128>;

impl Field for Small {
    fn from_i64(x: i64) -> Self {
        Ratio::from_integer(i128::from(x))
    }
    fn add_(&self, o: &Self) -> Option<Self> {
        self.checked_add(o)
    }
    fn sub_(&self, o: &Self) -> Option<Self> {
        self.checked_sub(o)
    }
    fn mul_(&self, o: &Self) -> Option<Self> {
        self.checked_mul(o)
    }
    fn div_(&self, o: &Self) -> Option<Self> {
        self.checked_div(o)
    }
    fn to_big(&self) -> BigRational {
        BigRational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
    }
}

struct Overflow;

fn ck<T>(x: Option<T>) -> Result<T, Overflow> {
    x.ok_or(Overflow)
}

/// Phase-one simplex with Bland's rule. Returns a vertex of
/// `{x >= 0 | rows}` if one exists.
pub(crate) fn feasible(n: usize, rows: &[Row]) -> Option<Vec<BigRational>> {
    match solve::<Small>(n, rows) {
        Ok(x) => x.map(|v| v.iter().map(Field::to_big).collect()),
        Err(Overflow) => solve::<BigRational>(n, rows)
            .ok()
            .expect("exact arithmetic cannot overflow"),
    }
}

fn solve<F: Field>(n: usize, rows: &[Row]) -> Result<Option<Vec<F>>, Overflow> {
    let m = rows.len();
    if m == 0 {
        return Ok(Some(vec![F::zero(); n]));
    }
    let slack_count = rows.iter().filter(|r| r.rel != Rel::Eq).count();
    let art0 = n + slack_count;
    let cols = art0 + m;
    let rhs_col = cols;
    let mut t: Vec<Vec<F>> = Vec::with_capacity(m + 1);
    let mut basis = Vec::with_capacity(m);
    let mut slack = n;
    for (i, r) in rows.iter().enumerate() {
        let mut row = vec![F::zero(); cols + 1];
        for &(j, c) in &r.coeffs {
            row[j] = ck(row[j].add_(&F::from_i64(c)))?;
        }
        match r.rel {
            Rel::Le => {
                row[slack] = F::one();
                slack += 1;
            }
            Rel::Ge => {
                row[slack] = -F::one();
                slack += 1;
            }
            Rel::Eq => {}
        }
        row[rhs_col] = F::from_i64(r.rhs);
        if row[rhs_col].is_negative() {
            for x in row.iter_mut() {
                *x = -x.clone();
            }
        }
        row[art0 + i] = F::one();
        basis.push(art0 + i);
        t.push(row);
    }
    // reduced costs of the phase-one objective Σ artificials
    let mut obj = vec![F::zero(); cols + 1];
    for row in &t {
        for j in (0..art0).chain([rhs_col]) {
            if !row[j].is_zero() {
                obj[j] = ck(obj[j].sub_(&row[j]))?;
            }
        }
    }
    t.push(obj);

    loop {
        let Some(enter) = (0..cols).find(|&j| t[m][j].is_negative()) else {
            break;
        };
        let mut leave: Option<(usize, F)> = None;
        for i in 0..m {
            if t[i][enter].is_positive() {
                let ratio = ck(t[i][rhs_col].div_(&t[i][enter]))?;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((p, _)) = leave else {
            // unbounded direction cannot occur for a bounded-below objective
            break;
        };
        pivot(&mut t, p, enter)?;
        basis[p] = enter;
    }
    if !t[m][rhs_col].is_zero() {
        return Ok(None);
    }
    let mut x = vec![F::zero(); n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = t[i][rhs_col].clone();
        }
    }
    Ok(Some(x))
}

fn pivot<F: Field>(t: &mut [Vec<F>], p: usize, q: usize) -> Result<(), Overflow> {
    let inv = ck(F::one().div_(&t[p][q]))?;
    for x in t[p].iter_mut() {
        if !x.is_zero() {
            *x = ck(x.mul_(&inv))?;
        }
    }
    let prow = t[p].clone();
    let nz: Vec<usize> = (0..prow.len()).filter(|&j| !prow[j].is_zero()).collect();
    for (i, row) in t.iter_mut().enumerate() {
        if i == p || row[q].is_zero() {
            continue;
        }
        let f = row[q].clone();
        for &j in &nz {
            let d = ck(f.mul_(&prow[j]))?;
            row[j] = ck(row[j].sub_(&d))?;
        }
    }
    Ok(())
}
