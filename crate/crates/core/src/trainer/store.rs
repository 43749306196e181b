//! Parameter storage for the trainer.
//!
//! [`DenseStore`] is the single-worker reference. [`AtomicStore`] backs the
//! sharded mode: every value is an `AtomicU64` holding `f64` bits, accessed
//! with relaxed loads and stores. A row update is a plain read-modify-write,
//! so concurrent updates to the same row may overwrite each other.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;

const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Target,
    Context,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Step {
    pub lr: f64,
    pub adagrad: bool,
}

pub(crate) trait ParamStore {
    fn read(&self, side: Side, row: usize, out: &mut [f64]);
    fn update(&mut self, side: Side, row: usize, grad: &[f64], step: Step);
}

#[inline]
fn step_value(x: f64, acc: f64, g: f64, step: Step) -> (f64, f64) {
    if step.adagrad {
        let acc = acc + g * g;
        (x - step.lr * g / (acc.sqrt() + ADAGRAD_EPS), acc)
    } else {
        (x - step.lr * g, acc)
    }
}

pub(crate) struct DenseStore {
    dim: usize,
    w: Vec<f64>,
    c: Vec<f64>,
    acc_w: Vec<f64>,
    acc_c: Vec<f64>,
}

impl DenseStore {
    pub fn new(w: Array2<f64>, c: Array2<f64>) -> Self {
        let dim = w.ncols();
        let acc_w = vec![0.0; w.len()];
        let acc_c = vec![0.0; c.len()];
        DenseStore {
            dim,
            w: w.into_raw_vec_and_offset().0,
            c: c.into_raw_vec_and_offset().0,
            acc_w,
            acc_c,
        }
    }

    pub fn into_matrices(self) -> (Array2<f64>, Array2<f64>) {
        let n = self.w.len() / self.dim;
        (
            Array2::from_shape_vec((n, self.dim), self.w).expect("shape preserved"),
            Array2::from_shape_vec((n, self.dim), self.c).expect("shape preserved"),
        )
    }
}

impl ParamStore for DenseStore {
    #[inline]
    fn read(&self, side: Side, row: usize, out: &mut [f64]) {
        let m = match side {
            Side::Target => &self.w,
            Side::Context => &self.c,
        };
        out.copy_from_slice(&m[row * self.dim..(row + 1) * self.dim]);
    }

    #[inline]
    fn update(&mut self, side: Side, row: usize, grad: &[f64], step: Step) {
        let (m, acc) = match side {
            Side::Target => (&mut self.w, &mut self.acc_w),
            Side::Context => (&mut self.c, &mut self.acc_c),
        };
        let range = row * self.dim..(row + 1) * self.dim;
        for ((x, a), &g) in m[range.clone()].iter_mut().zip(&mut acc[range]).zip(grad) {
            let (nx, na) = step_value(*x, *a, g, step);
            *x = nx;
            *a = na;
        }
    }
}

pub(crate) struct AtomicStore {
    dim: usize,
    w: Vec<AtomicU64>,
    c: Vec<AtomicU64>,
    acc_w: Vec<AtomicU64>,
    acc_c: Vec<AtomicU64>,
}

fn to_atomic(v: impl IntoIterator<Item = f64>) -> Vec<AtomicU64> {
    v.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect()
}

fn from_atomic(v: Vec<AtomicU64>) -> Vec<f64> {
    v.into_iter().map(|a| f64::from_bits(a.into_inner())).collect()
}

impl AtomicStore {
    pub fn new(w: Array2<f64>, c: Array2<f64>) -> Self {
        let dim = w.ncols();
        let len = w.len();
        AtomicStore {
            dim,
            w: to_atomic(w.into_raw_vec_and_offset().0),
            c: to_atomic(c.into_raw_vec_and_offset().0),
            acc_w: to_atomic(std::iter::repeat_n(0.0, len)),
            acc_c: to_atomic(std::iter::repeat_n(0.0, len)),
        }
    }

    pub fn view(&self) -> AtomicView<'_> {
        AtomicView(self)
    }

    pub fn into_matrices(self) -> (Array2<f64>, Array2<f64>) {
        let n = self.w.len() / self.dim;
        (
            Array2::from_shape_vec((n, self.dim), from_atomic(self.w)).expect("shape preserved"),
            Array2::from_shape_vec((n, self.dim), from_atomic(self.c)).expect("shape preserved"),
        )
    }
}

/// Per-worker handle onto a shared [`AtomicStore`].
#[derive(Clone, Copy)]
pub(crate) struct AtomicView<'a>(&'a AtomicStore);

impl ParamStore for AtomicView<'_> {
    #[inline]
    fn read(&self, side: Side, row: usize, out: &mut [f64]) {
        let s = self.0;
        let m = match side {
            Side::Target => &s.w,
            Side::Context => &s.c,
        };
        for (o, a) in out.iter_mut().zip(&m[row * s.dim..(row + 1) * s.dim]) {
            *o = f64::from_bits(a.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn update(&mut self, side: Side, row: usize, grad: &[f64], step: Step) {
        let s = self.0;
        let (m, acc) = match side {
            Side::Target => (&s.w, &s.acc_w),
            Side::Context => (&s.c, &s.acc_c),
        };
        let range = row * s.dim..(row + 1) * s.dim;
        for ((x, a), &g) in m[range.clone()].iter().zip(&acc[range]).zip(grad) {
            let (nx, na) = step_value(
                f64::from_bits(x.load(Ordering::Relaxed)),
                f64::from_bits(a.load(Ordering::Relaxed)),
                g,
                step,
            );
            x.store(nx.to_bits(), Ordering::Relaxed);
            a.store(na.to_bits(), Ordering::Relaxed);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dense_and_atomic_agree_single_threaded() {
        let w = array![[1.0, 2.0], [3.0, 4.0]];
        let c = array![[0.5, -0.5], [0.0, 1.0]];
        let mut dense = DenseStore::new(w.clone(), c.clone());
        let atomic = AtomicStore::new(w, c);
        let mut view = atomic.view();
        for step in [Step { lr: 0.1, adagrad: true }, Step { lr: 0.1, adagrad: false }] {
            dense.update(Side::Target, 1, &[0.3, -0.2], step);
            view.update(Side::Target, 1, &[0.3, -0.2], step);
            dense.update(Side::Context, 0, &[1.0, 2.0], step);
            view.update(Side::Context, 0, &[1.0, 2.0], step);
        }
        let mut a = [0.0; 2];
        let mut b = [0.0; 2];
        dense.read(Side::Target, 1, &mut a);
        view.read(Side::Target, 1, &mut b);
        assert_eq!(a, b);
        assert_eq!(dense.into_matrices(), atomic.into_matrices());
    }

    #[test]
    fn adagrad_first_step_has_size_lr() {
        let mut s = DenseStore::new(array![[0.0]], array![[0.0]]);
        s.update(Side::Target, 0, &[4.0], Step { lr: 0.05, adagrad: true });
        let mut out = [0.0];
        s.read(Side::Target, 0, &mut out);
        assert!((out[0] + 0.05).abs() < 1e-9);
    }
}
