//! Revised simplex specialized to the k-median relaxation.
//!
//! Columns are `y_p`, `z_pq` and the surplus `s_pq` of the linking row
//! `y_p − z_pq − s_pq = 0`; rows are the assignment rows `A_q`, the linking
//! rows `L_pq` and the cardinality row `K`. A pair `(p, q)` has none, one or
//! both of `z_pq`, `s_pq` basic. Eliminating the pair variables leaves a
//! square core system in the basic `y` whose rows are `K`, the assignment
//! rows without a doubly basic pair and the linking rows of pairs with
//! neither variable basic. Only that core is factorized.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pair {
    Neither,
    Z,
    S,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Var {
    Y(usize),
    Z(usize, usize),
    S(usize, usize),
}

impl Var {
    /// Position in the column order `y`, `z`, `s`.
    fn index(self, n: usize) -> usize {
        match self {
            Var::Y(p) => p,
            Var::Z(p, q) => n + p * n + q,
            Var::S(p, q) => n + n * n + p * n + q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CoreRow {
    K,
    A(usize),
    L(usize, usize),
}

/// Dense LU factorization with partial pivoting.
struct Lu {
    n: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn new(n: usize, mut a: Vec<f64>) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let mut piv = c;
            let mut best = a[c * n + c].abs();
            for r in c + 1..n {
                let v = a[r * n + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return Err(Error::Numerical("singular basis".into()));
            }
            if piv != c {
                for j in 0..n {
                    a.swap(c * n + j, piv * n + j);
                }
                perm.swap(c, piv);
            }
            let d = a[c * n + c];
            for r in c + 1..n {
                let f = a[r * n + c] / d;
                a[r * n + c] = f;
                if f != 0.0 {
                    for j in c + 1..n {
                        a[r * n + j] -= f * a[c * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, a, perm })
    }

    /// Solves `A x = b`.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for r in 0..n {
            let mut s = x[r];
            for j in 0..r {
                s -= self.a[r * n + j] * x[j];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for j in r + 1..n {
                s -= self.a[r * n + j] * x[j];
            }
            x[r] = s / self.a[r * n + r];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    fn solve_transposed(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut w = b.to_vec();
        for r in 0..n {
            let mut s = w[r];
            for j in 0..r {
                s -= self.a[j * n + r] * w[j];
            }
            w[r] = s / self.a[r * n + r];
        }
        for r in (0..n).rev() {
            let mut s = w[r];
            for j in r + 1..n {
                s -= self.a[j * n + r] * w[j];
            }
            w[r] = s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }
}

/// Values of all variables (zero for nonbasic ones).
#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
}

impl Point {
    fn get(&self, v: Var, n: usize) -> f64 {
        match v {
            Var::Y(p) => self.y[p],
            Var::Z(p, q) => self.z[p * n + q],
            Var::S(p, q) => self.s[p * n + q],
        }
    }

    fn set(&mut self, v: Var, n: usize, value: f64) {
        match v {
            Var::Y(p) => self.y[p] = value,
            Var::Z(p, q) => self.z[p * n + q] = value,
            Var::S(p, q) => self.s[p * n + q] = value,
        }
    }
}

/// Row prices: assignment rows, linking rows (row-major) and cardinality.
pub(crate) struct Duals {
    pub a: Vec<f64>,
    pub l: Vec<f64>,
    pub k: f64,
}

/// Prices with the linking part kept implicit.
struct Prices {
    a: Vec<f64>,
    k: f64,
    none: HashMap<usize, f64>,
}

impl Prices {
    fn linking(&self, basis: &Basis, cost: &[f64], p: usize, q: usize) -> f64 {
        let i = p * basis.n + q;
        match basis.pairs[i] {
            Pair::Z => self.a[q] - cost[i],
            Pair::Neither => self.none.get(&i).copied().unwrap_or(0.0),
            Pair::S | Pair::Both => 0.0,
        }
    }
}

pub(crate) struct Basis {
    n: usize,
    y_basic: Vec<bool>,
    pairs: Vec<Pair>,
    /// Rows `p` of doubly basic pairs, per column.
    both: Vec<Vec<usize>>,
    /// Rows `p` with only `z_pq` basic, per column.
    z_only: Vec<Vec<usize>>,
    /// Pairs with neither variable basic.
    none: BTreeSet<usize>,
    // Refreshed by `factor`.
    y_list: Vec<usize>,
    y_pos: Vec<usize>,
    rows: Vec<CoreRow>,
    a_row: Vec<usize>,
    none_row: HashMap<usize, usize>,
    lu: Option<Lu>,
}

impl Basis {
    /// Basis of the integral solution with the given centers and assignment
    /// (positions into `centers`). For a point `p` that is not a center,
    /// `z_pq` is basic at zero when `p` is cheaper for `q` than its center,
    /// which keeps the reduced costs of those rows nonnegative from the start.
    pub(crate) fn from_clustering(n: usize, centers: &[usize], assignment: &[usize], cost: &[f64]) -> Result<Self> {
        let mut b = Basis {
            n,
            y_basic: vec![false; n],
            pairs: vec![Pair::Neither; n * n],
            both: vec![Vec::new(); n],
            z_only: vec![Vec::new(); n],
            none: (0..n * n).collect(),
            y_list: Vec::new(),
            y_pos: vec![usize::MAX; n],
            rows: Vec::new(),
            a_row: vec![usize::MAX; n],
            none_row: HashMap::new(),
            lu: None,
        };
        for &c in centers {
            b.y_basic[c] = true;
        }
        let first = centers[0];
        for p in 0..n {
            for q in 0..n {
                let own = centers[assignment[q]];
                let state = if !b.y_basic[p] {
                    if cost[p * n + q] < cost[own * n + q] {
                        Pair::Z
                    } else {
                        Pair::S
                    }
                } else if own == p {
                    if !b.y_basic[q] || q == first {
                        Pair::Both
                    } else {
                        Pair::Z
                    }
                } else {
                    Pair::S
                };
                b.set_pair(p, q, state);
            }
        }
        b.factor()?;
        Ok(b)
    }

    fn set_pair(&mut self, p: usize, q: usize, state: Pair) {
        let i = p * self.n + q;
        match self.pairs[i] {
            Pair::Both => self.both[q].retain(|&r| r != p),
            Pair::Z => self.z_only[q].retain(|&r| r != p),
            Pair::Neither => {
                self.none.remove(&i);
            }
            Pair::S => {}
        }
        match state {
            Pair::Both => self.both[q].push(p),
            Pair::Z => self.z_only[q].push(p),
            Pair::Neither => {
                self.none.insert(i);
            }
            Pair::S => {}
        }
        self.pairs[i] = state;
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        self.y_list = (0..n).filter(|&p| self.y_basic[p]).collect();
        self.y_pos = vec![usize::MAX; n];
        for (i, &p) in self.y_list.iter().enumerate() {
            self.y_pos[p] = i;
        }
        let mut rows = vec![CoreRow::K];
        self.a_row = vec![usize::MAX; n];
        for q in 0..n {
            match self.both[q].len() {
                0 => {
                    self.a_row[q] = rows.len();
                    rows.push(CoreRow::A(q));
                }
                1 => {}
                _ => return Err(Error::Numerical("singular basis: two doubly basic pairs in a row".into())),
            }
        }
        self.none_row.clear();
        for &i in &self.none {
            let (p, q) = (i / n, i % n);
            if !self.y_basic[p] {
                return Err(Error::Numerical("singular basis: empty linking row".into()));
            }
            self.none_row.insert(i, rows.len());
            rows.push(CoreRow::L(p, q));
        }
        let m = self.y_list.len();
        if rows.len() != m {
            return Err(Error::Numerical(format!(
                "singular basis: {} core rows for {} basic y",
                rows.len(),
                m
            )));
        }
        let mut a = vec![0.0; m * m];
        for (r, row) in rows.iter().enumerate() {
            match *row {
                CoreRow::K => a[r * m..(r + 1) * m].fill(1.0),
                CoreRow::A(q) => {
                    for &p in &self.z_only[q] {
                        if self.y_basic[p] {
                            a[r * m + self.y_pos[p]] = 1.0;
                        }
                    }
                }
                CoreRow::L(p, _) => a[r * m + self.y_pos[p]] = 1.0,
            }
        }
        self.rows = rows;
        self.lu = Some(Lu::new(m, a)?);
        Ok(())
    }

    fn lu(&self) -> &Lu {
        self.lu.as_ref().expect("factored basis")
    }

    /// Basic solution for the right-hand side `(1, 0, k)`.
    fn primal(&self, k: usize) -> Point {
        let n = self.n;
        let rhs: Vec<f64> = self
            .rows
            .iter()
            .map(|row| match *row {
                CoreRow::K => k as f64,
                CoreRow::A(_) => 1.0,
                CoreRow::L(..) => 0.0,
            })
            .collect();
        let yv = self.lu().solve(&rhs);
        let mut x = Point {
            y: vec![0.0; n],
            z: vec![0.0; n * n],
            s: vec![0.0; n * n],
        };
        for (i, &p) in self.y_list.iter().enumerate() {
            x.y[p] = yv[i];
        }
        for p in 0..n {
            for q in 0..n {
                let i = p * n + q;
                match self.pairs[i] {
                    Pair::Z => x.z[i] = x.y[p],
                    Pair::S => x.s[i] = x.y[p],
                    _ => {}
                }
            }
        }
        for q in 0..n {
            if let Some(&w) = self.both[q].first() {
                let z = 1.0 - self.z_only[q].iter().map(|&p| x.y[p]).sum::<f64>();
                x.z[w * n + q] = z;
                x.s[w * n + q] = x.y[w] - z;
            }
        }
        x
    }

    /// Nonzero entries of `B⁻¹ a` for the column `a` of `v`.
    fn direction(&self, v: Var) -> Vec<(Var, f64)> {
        let n = self.n;
        // Assignment entry, a full row of linking entries (for `y`), a single
        // linking entry (for `z`, `s`) and the cardinality entry.
        let (ra, rk, full_row, single) = match v {
            Var::Y(p) => (None, 1.0, Some(p), None),
            Var::Z(p, q) => (Some(q), 0.0, None, Some((p, q))),
            Var::S(p, q) => (None, 0.0, None, Some((p, q))),
        };
        let rl = |p: usize, q: usize| -> f64 {
            match v {
                Var::Y(r) if r == p => 1.0,
                Var::Z(r, c) | Var::S(r, c) if r == p && c == q => -1.0,
                _ => 0.0,
            }
        };
        let mut rhs = vec![0.0; self.rows.len()];
        rhs[0] = rk;
        if let Some(q) = ra {
            if self.a_row[q] != usize::MAX {
                rhs[self.a_row[q]] += 1.0;
            }
        }
        let mut linking_entry = |p: usize, q: usize, val: f64| {
            let i = p * n + q;
            match self.pairs[i] {
                Pair::Z if self.a_row[q] != usize::MAX => rhs[self.a_row[q]] += val,
                Pair::Neither => rhs[self.none_row[&i]] += val,
                _ => {}
            }
        };
        if let Some(p) = full_row {
            for q in 0..n {
                linking_entry(p, q, 1.0);
            }
        }
        if let Some((p, q)) = single {
            linking_entry(p, q, -1.0);
        }
        let yv = self.lu().solve(&rhs);
        let mut dy = vec![0.0; n];
        let mut out = Vec::new();
        let mut visit: Vec<usize> = Vec::new();
        for (i, &p) in self.y_list.iter().enumerate() {
            if yv[i] != 0.0 {
                dy[p] = yv[i];
                out.push((Var::Y(p), yv[i]));
                visit.push(p);
            }
        }
        if let Some(p) = full_row {
            if dy[p] == 0.0 {
                visit.push(p);
            }
        }
        let mut colsum = vec![0.0; n];
        let mut touched = vec![false; n];
        let mut pair_entry = |p: usize, q: usize, out: &mut Vec<(Var, f64)>| {
            let val = dy[p] - rl(p, q);
            match self.pairs[p * n + q] {
                Pair::Z => {
                    if val != 0.0 {
                        out.push((Var::Z(p, q), val));
                        colsum[q] += val;
                        touched[q] = true;
                    }
                }
                Pair::S => {
                    if val != 0.0 {
                        out.push((Var::S(p, q), val));
                    }
                }
                Pair::Both => touched[q] = true,
                Pair::Neither => {}
            }
        };
        for &p in &visit {
            for q in 0..n {
                pair_entry(p, q, &mut out);
            }
        }
        if let Some((p, q)) = single {
            if !visit.contains(&p) {
                pair_entry(p, q, &mut out);
            }
        }
        if let Some(q) = ra {
            touched[q] = true;
        }
        for q in 0..n {
            if !touched[q] {
                continue;
            }
            if let Some(&w) = self.both[q].first() {
                let a = if ra == Some(q) { 1.0 } else { 0.0 };
                let z = a - colsum[q];
                let s = dy[w] - rl(w, q) - z;
                if z != 0.0 {
                    out.push((Var::Z(w, q), z));
                }
                if s != 0.0 {
                    out.push((Var::S(w, q), s));
                }
            }
        }
        out
    }

    /// Solves `πᵀ B = c_Bᵀ` for the z costs `cost`.
    fn prices(&self, cost: &[f64]) -> Prices {
        let n = self.n;
        let mut a = vec![0.0; n];
        for q in 0..n {
            if let Some(&w) = self.both[q].first() {
                a[q] = cost[w * n + q];
            }
        }
        let mut rhs = vec![0.0; self.y_list.len()];
        for (j, &p) in self.y_list.iter().enumerate() {
            let mut s = 0.0;
            for q in 0..n {
                if self.pairs[p * n + q] == Pair::Z {
                    s += cost[p * n + q] - a[q];
                }
            }
            rhs[j] = s;
        }
        let u = self.lu().solve_transposed(&rhs);
        let mut k = 0.0;
        let mut none = HashMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            match *row {
                CoreRow::K => k = u[i],
                CoreRow::A(q) => a[q] = u[i],
                CoreRow::L(p, q) => {
                    none.insert(p * n + q, u[i]);
                }
            }
        }
        Prices { a, k, none }
    }

    fn is_basic(&self, v: Var) -> bool {
        let n = self.n;
        match v {
            Var::Y(p) => self.y_basic[p],
            Var::Z(p, q) => matches!(self.pairs[p * n + q], Pair::Z | Pair::Both),
            Var::S(p, q) => matches!(self.pairs[p * n + q], Pair::S | Pair::Both),
        }
    }

    fn enter(&mut self, v: Var) {
        let n = self.n;
        match v {
            Var::Y(p) => self.y_basic[p] = true,
            Var::Z(p, q) => {
                let s = if self.pairs[p * n + q] == Pair::S { Pair::Both } else { Pair::Z };
                self.set_pair(p, q, s);
            }
            Var::S(p, q) => {
                let s = if self.pairs[p * n + q] == Pair::Z { Pair::Both } else { Pair::S };
                self.set_pair(p, q, s);
            }
        }
    }

    fn leave(&mut self, v: Var) {
        let n = self.n;
        match v {
            Var::Y(p) => self.y_basic[p] = false,
            Var::Z(p, q) => {
                let s = if self.pairs[p * n + q] == Pair::Both { Pair::S } else { Pair::Neither };
                self.set_pair(p, q, s);
            }
            Var::S(p, q) => {
                let s = if self.pairs[p * n + q] == Pair::Both { Pair::Z } else { Pair::Neither };
                self.set_pair(p, q, s);
            }
        }
    }
}

pub(crate) struct Outcome {
    pub x: Point,
    pub duals: Duals,
    pub iterations: usize,
}

pub(crate) struct Settings {
    pub max_iterations: usize,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub refresh_every: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_iterations: 1_000_000,
            optimality_tol: 1e-11,
            pivot_tol: 1e-9,
            refresh_every: 100,
        }
    }
}

/// Runs primal simplex from a feasible starting basis. Dantzig pricing on
/// column-norm scaled reduced costs, switching to Bland's rule after a run
/// of `10·rows` degenerate pivots and back after the next nondegenerate one.
pub(crate) fn run(n: usize, k: usize, cost: &[f64], mut basis: Basis, settings: &Settings) -> Result<Outcome> {
    let scale = 1.0 + cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let opt_tol = settings.optimality_tol * scale;
    let mut x = basis.primal(k);
    let degenerate_limit = 10 * (n + n * n + 1);
    // Reduced costs are compared per unit column norm; `y` columns have
    // `n + 1` unit entries, `z` columns two, `s` columns one.
    let y_scale = 1.0 / ((n + 1) as f64).sqrt();
    let z_scale = 1.0 / 2f64.sqrt();
    let mut degenerate_run = 0;
    let mut bland = false;
    for it in 0..settings.max_iterations {
        if it > 0 && it % settings.refresh_every == 0 {
            x = basis.primal(k);
        }
        let prices = basis.prices(cost);
        let mut entering: Option<(Var, f64)> = None;
        let mut consider = |v: Var, rc: f64| {
            if rc < -opt_tol {
                let better = match entering {
                    None => true,
                    Some((_, best)) => !bland && rc < best,
                };
                if better {
                    entering = Some((v, rc));
                }
            }
        };
        for p in 0..n {
            let mut row = 0.0;
            for q in 0..n {
                let i = p * n + q;
                let pl = prices.linking(&basis, cost, p, q);
                row += pl;
                let rz = (cost[i] - prices.a[q] + pl) * z_scale;
                match basis.pairs[i] {
                    Pair::Neither => {
                        consider(Var::Z(p, q), rz);
                        consider(Var::S(p, q), pl);
                    }
                    Pair::S => consider(Var::Z(p, q), rz),
                    Pair::Z => consider(Var::S(p, q), pl),
                    Pair::Both => {}
                }
            }
            if !basis.y_basic[p] {
                consider(Var::Y(p), -(row + prices.k) * y_scale);
            }
        }
        let Some((enter, _)) = entering else {
            let x = basis.primal(k);
            let mut l = vec![0.0; n * n];
            for p in 0..n {
                for q in 0..n {
                    l[p * n + q] = prices.linking(&basis, cost, p, q);
                }
            }
            return Ok(Outcome {
                x,
                duals: Duals {
                    a: prices.a,
                    l,
                    k: prices.k,
                },
                iterations: it,
            });
        };
        let dir = basis.direction(enter);
        let mut leave: Option<(Var, f64, f64)> = None;
        for &(v, dv) in &dir {
            if dv <= settings.pivot_tol {
                continue;
            }
            let ratio = x.get(v, n).max(0.0) / dv;
            let better = match leave {
                None => true,
                Some((lv, r, d)) => {
                    ratio < r - 1e-12
                        || (ratio <= r + 1e-12 && if bland { v.index(n) < lv.index(n) } else { dv > d })
                }
            };
            if better {
                leave = Some((v, ratio, dv));
            }
        }
        let Some((out, theta, _)) = leave else {
            return Err(Error::Numerical("unbounded direction in a bounded program".into()));
        };
        debug_assert!(basis.is_basic(out) && !basis.is_basic(enter));
        if theta <= 1e-12 {
            degenerate_run += 1;
            if degenerate_run >= degenerate_limit {
                bland = true;
            }
        } else {
            degenerate_run = 0;
            bland = false;
        }
        for &(v, dv) in &dir {
            let cur = x.get(v, n);
            x.set(v, n, cur - theta * dv);
        }
        x.set(enter, n, theta);
        x.set(out, n, 0.0);
        basis.enter(enter);
        basis.leave(out);
        basis.factor()?;
    }
    Err(Error::Numerical(format!(
        "simplex did not finish within {} iterations",
        settings.max_iterations
    )))
}
