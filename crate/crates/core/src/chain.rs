//! Finite Markov chain utilities: class structure, period, stationary law and
//! the Poisson equation for additive functionals.

use nalgebra::{DMatrix, DVector};
use num_integer::Integer;

use crate::error::{Error, Result};

/// Above this many states the dense solvers give way to iteration.
pub const DENSE_LIMIT: usize = 2000;

/// A finite chain stored as sparse rows of `(target, probability)`.
#[derive(Clone, Debug)]
pub struct FiniteChain {
    rows: Vec<Vec<(usize, f64)>>,
}

impl FiniteChain {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().filter(|&(_, p)| p > 0.0).collect())
            .collect();
        FiniteChain { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// `(P g)(i) = sum_j P(i,j) g(j)`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, p)| p * g[j]).sum())
            .collect()
    }

    /// `(mu P)(j) = sum_i mu(i) P(i,j)`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, r) in self.rows.iter().enumerate() {
            if mu[i] == 0.0 {
                continue;
            }
            for &(j, p) in r {
                out[j] += mu[i] * p;
            }
        }
        out
    }

    /// Strongly connected components (Kosaraju, iterative).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![(start, 0usize)];
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(&(w, _)) = self.rows[v].get(*next) {
                    *next += 1;
                    if !seen[w] {
                        seen[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        let mut reverse = vec![Vec::new(); n];
        for (v, r) in self.rows.iter().enumerate() {
            for &(w, _) in r {
                reverse[w].push(v);
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for &root in order.iter().rev() {
            if comp[root] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = vec![root];
            comp[root] = id;
            let mut stack = vec![root];
            while let Some(v) = stack.pop() {
                for &w in &reverse[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps.sort();
        comps
    }

    /// Components with no transition leaving them (the recurrent classes).
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let comps = self.components();
        let mut which = vec![0usize; self.len()];
        for (id, c) in comps.iter().enumerate() {
            for &v in c {
                which[v] = id;
            }
        }
        comps
            .iter()
            .enumerate()
            .filter(|(id, c)| {
                c.iter()
                    .all(|&v| self.rows[v].iter().all(|&(w, _)| which[w] == *id))
            })
            .map(|(_, c)| c.clone())
            .collect()
    }

    /// Period of an irreducible class (gcd of cycle lengths).
    pub fn period(&self, class: &[usize]) -> usize {
        let Some(&root) = class.first() else {
            return 0;
        };
        let mut member = vec![false; self.len()];
        for &v in class {
            member[v] = true;
        }
        let mut level = vec![usize::MAX; self.len()];
        level[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        let mut g = 0usize;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &self.rows[v] {
                if !member[w] {
                    continue;
                }
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                } else {
                    let diff = (level[v] + 1).abs_diff(level[w]);
                    g = g.gcd(&diff);
                }
            }
        }
        g
    }

    /// The unique recurrent class, provided it is aperiodic.
    pub fn ergodic_class(&self) -> Result<Vec<usize>> {
        let closed = self.closed_classes();
        match closed.len() {
            0 => Err(Error::NonErgodic("no recurrent class".into())),
            1 => {
                let class = closed.into_iter().next().unwrap_or_default();
                let period = self.period(&class);
                if period != 1 {
                    return Err(Error::NonErgodic(format!("not aperiodic (period {period})")));
                }
                Ok(class)
            }
            k => Err(Error::NonErgodic(format!("not irreducible ({k} closed classes)"))),
        }
    }

    /// Stationary distribution supported on the ergodic class.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let class = self.ergodic_class()?;
        let mut local = vec![usize::MAX; self.len()];
        for (k, &v) in class.iter().enumerate() {
            local[v] = k;
        }
        let m = class.len();
        let pi_local = if m <= DENSE_LIMIT {
            // Solve pi (P - I) = 0 with one equation replaced by sum(pi) = 1.
            let mut a = DMatrix::<f64>::zeros(m, m);
            for (k, &v) in class.iter().enumerate() {
                for &(w, p) in &self.rows[v] {
                    a[(local[w], k)] += p;
                }
                a[(k, k)] -= 1.0;
            }
            for k in 0..m {
                a[(m - 1, k)] = 1.0;
            }
            let mut b = DVector::<f64>::zeros(m);
            b[m - 1] = 1.0;
            let sol = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Singular("stationary system".into()))?;
            let mut pi: Vec<f64> = sol.iter().map(|&x| x.max(0.0)).collect();
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|x| *x /= total);
            pi
        } else {
            let mut pi = vec![1.0 / m as f64; m];
            for _ in 0..1_000_000 {
                let mut next = vec![0.0; m];
                for (k, &v) in class.iter().enumerate() {
                    for &(w, p) in &self.rows[v] {
                        next[local[w]] += pi[k] * p;
                    }
                }
                let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
                pi = next;
                if diff <= 1e-13 {
                    break;
                }
            }
            pi
        };
        let mut pi = vec![0.0; self.len()];
        for (k, &v) in class.iter().enumerate() {
            pi[v] = pi_local[k];
        }
        Ok(pi)
    }

    /// Solves `g - P g = f - pi(f)` with `pi(g) = 0` on the support of `pi`.
    /// Entries off the support are returned as zero.
    pub fn poisson(&self, pi: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let support: Vec<usize> = (0..self.len()).filter(|&i| pi[i] > 0.0).collect();
        let mut local = vec![usize::MAX; self.len()];
        for (k, &v) in support.iter().enumerate() {
            local[v] = k;
        }
        let mean: f64 = support.iter().map(|&i| pi[i] * f[i]).sum();
        let m = support.len();
        let centered: Vec<f64> = support.iter().map(|&i| f[i] - mean).collect();
        let g_local = if m <= DENSE_LIMIT {
            // (I - P + 1 pi^T) g = f - mean
            let mut a = DMatrix::<f64>::zeros(m, m);
            for (r, &v) in support.iter().enumerate() {
                a[(r, r)] += 1.0;
                for &(w, p) in &self.rows[v] {
                    if local[w] != usize::MAX {
                        a[(r, local[w])] -= p;
                    }
                }
                for (c, &w) in support.iter().enumerate() {
                    a[(r, c)] += pi[w];
                }
            }
            let b = DVector::from_vec(centered);
            let sol = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Singular("Poisson equation".into()))?;
            sol.iter().copied().collect::<Vec<f64>>()
        } else {
            let mut term = centered.clone();
            let mut g = centered;
            for _ in 0..1_000_000 {
                let next: Vec<f64> = support
                    .iter()
                    .map(|&v| {
                        self.rows[v]
                            .iter()
                            .filter(|&&(w, _)| local[w] != usize::MAX)
                            .map(|&(w, p)| p * term[local[w]])
                            .sum()
                    })
                    .collect();
                let size = next.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                g.iter_mut().zip(&next).for_each(|(a, b)| *a += b);
                term = next;
                if size < 1e-15 {
                    break;
                }
            }
            g
        };
        let mut g = vec![0.0; self.len()];
        for (k, &v) in support.iter().enumerate() {
            g[v] = g_local[k];
        }
        Ok(g)
    }
}
