//! Linear-chain lattice computations: Viterbi, path scores and
//! forward-backward marginals.
//!
//! Scores are emission + transition sums. Transitions forbidden by the
//! constraint mask are excluded outright rather than weighted.

use crate::scalar::{log_sum_exp, Scalar};

/// Per-position label scores, row-major `n x labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Emissions<T> {
    pub n: usize,
    pub labels: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Emissions<T> {
    pub fn zeros(n: usize, labels: usize) -> Self {
        Emissions { n, labels, data: vec![T::zero(); n * labels] }
    }

    #[inline]
    pub fn get(&self, t: usize, y: usize) -> T {
        self.data[t * self.labels + y]
    }

    #[inline]
    pub fn add(&mut self, t: usize, y: usize, v: T) {
        self.data[t * self.labels + y] = self.data[t * self.labels + y] + v;
    }
}

/// Transition and start scores plus the hard constraint mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T> {
    pub labels: usize,
    pub start: Vec<T>,
    /// `pairs[prev * labels + next]`
    pub pairs: Vec<T>,
    pub start_allowed: Vec<bool>,
    pub allowed: Vec<bool>,
}

impl<T: Scalar> Chain<T> {
    /// All transitions allowed, all scores zero.
    pub fn unconstrained(labels: usize) -> Self {
        Chain {
            labels,
            start: vec![T::zero(); labels],
            pairs: vec![T::zero(); labels * labels],
            start_allowed: vec![true; labels],
            allowed: vec![true; labels * labels],
        }
    }

    #[inline]
    pub fn pair(&self, prev: usize, next: usize) -> Option<T> {
        let k = prev * self.labels + next;
        self.allowed[k].then(|| self.pairs[k])
    }

    #[inline]
    pub fn first(&self, y: usize) -> Option<T> {
        self.start_allowed[y].then(|| self.start[y])
    }
}

/// Score of one label path; `-inf` if it uses a forbidden transition.
pub fn path_score<T: Scalar>(em: &Emissions<T>, chain: &Chain<T>, path: &[usize]) -> T {
    let Some(&y0) = path.first() else {
        return T::zero();
    };
    let Some(s) = chain.first(y0) else {
        return T::neg_infinity();
    };
    let mut score = s + em.get(0, y0);
    for t in 1..path.len() {
        match chain.pair(path[t - 1], path[t]) {
            Some(p) => score = score + p + em.get(t, path[t]),
            None => return T::neg_infinity(),
        }
    }
    score
}

/// Exact best path. Ties go to the lowest label index at every step.
pub fn viterbi<T: Scalar>(em: &Emissions<T>, chain: &Chain<T>) -> (Vec<usize>, T) {
    let (n, l) = (em.n, em.labels);
    if n == 0 {
        return (Vec::new(), T::zero());
    }
    let mut delta = vec![T::neg_infinity(); n * l];
    let mut back = vec![0usize; n * l];
    for y in 0..l {
        if let Some(s) = chain.first(y) {
            delta[y] = s + em.get(0, y);
        }
    }
    for t in 1..n {
        for y in 0..l {
            let mut best = T::neg_infinity();
            let mut arg = 0;
            let mut found = false;
            for p in 0..l {
                let prev = delta[(t - 1) * l + p];
                if prev == T::neg_infinity() {
                    continue;
                }
                if let Some(tr) = chain.pair(p, y) {
                    let cand = prev + tr;
                    if !found || cand > best {
                        best = cand;
                        arg = p;
                        found = true;
                    }
                }
            }
            if found {
                delta[t * l + y] = best + em.get(t, y);
                back[t * l + y] = arg;
            }
        }
    }
    let last = &delta[(n - 1) * l..];
    let mut arg = 0;
    for y in 1..l {
        if last[y] > last[arg] {
            arg = y;
        }
    }
    let score = last[arg];
    let mut path = vec![0; n];
    path[n - 1] = arg;
    for t in (1..n).rev() {
        path[t - 1] = back[t * l + path[t]];
    }
    (path, score)
}

/// Log-space forward and backward tables.
#[derive(Debug, Clone)]
pub struct ForwardBackward<T> {
    pub n: usize,
    pub labels: usize,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub log_z: T,
}

impl<T: Scalar> ForwardBackward<T> {
    pub fn compute(em: &Emissions<T>, chain: &Chain<T>) -> Self {
        let (n, l) = (em.n, em.labels);
        let mut alpha = vec![T::neg_infinity(); n * l];
        let mut beta = vec![T::neg_infinity(); n * l];
        if n == 0 {
            return ForwardBackward { n, labels: l, alpha, beta, log_z: T::zero() };
        }
        for y in 0..l {
            if let Some(s) = chain.first(y) {
                alpha[y] = s + em.get(0, y);
            }
        }
        for t in 1..n {
            for y in 0..l {
                let terms = (0..l).filter_map(|p| chain.pair(p, y).map(|tr| alpha[(t - 1) * l + p] + tr));
                alpha[t * l + y] = log_sum_exp(terms) + em.get(t, y);
            }
        }
        for y in 0..l {
            beta[(n - 1) * l + y] = T::zero();
        }
        for t in (0..n - 1).rev() {
            for p in 0..l {
                let terms = (0..l)
                    .filter_map(|y| chain.pair(p, y).map(|tr| tr + em.get(t + 1, y) + beta[(t + 1) * l + y]));
                beta[t * l + p] = log_sum_exp(terms);
            }
        }
        let log_z = log_sum_exp(alpha[(n - 1) * l..].iter().copied());
        ForwardBackward { n, labels: l, alpha, beta, log_z }
    }

    /// `P(y_t = y)`.
    pub fn node_marginal(&self, t: usize, y: usize) -> T {
        let k = t * self.labels + y;
        (self.alpha[k] + self.beta[k] - self.log_z).exp()
    }

    /// `P(y_{t-1} = prev, y_t = next)` for `t >= 1`.
    pub fn edge_marginal(&self, em: &Emissions<T>, chain: &Chain<T>, t: usize, prev: usize, next: usize) -> T {
        match chain.pair(prev, next) {
            Some(tr) => (self.alpha[(t - 1) * self.labels + prev]
                + tr
                + em.get(t, next)
                + self.beta[t * self.labels + next]
                - self.log_z)
                .exp(),
            None => T::zero(),
        }
    }
}
