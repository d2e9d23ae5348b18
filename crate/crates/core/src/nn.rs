//! Two-layer perceptron (linear, rectifier, linear) with manual backward.

use rand::Rng;

use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<R> {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    /// `hidden x input`, row-major.
    pub w1: Vec<R>,
    pub b1: Vec<R>,
    /// `output x hidden`, row-major.
    pub w2: Vec<R>,
    pub b2: Vec<R>,
}

impl<R: Real> Mlp<R> {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
            w1: vec![R::zero(); hidden * input],
            b1: vec![R::zero(); hidden],
            w2: vec![R::zero(); output * hidden],
            b2: vec![R::zero(); output],
        }
    }

    /// Uniform fan-in initialization; biases start at zero.
    pub fn random<G: Rng>(input: usize, hidden: usize, output: usize, rng: &mut G) -> Self {
        let mut m = Self::zeros(input, hidden, output);
        let a1 = (6.0 / input.max(1) as f64).sqrt();
        let a2 = (1.0 / hidden.max(1) as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = R::of(rng.random_range(-a1..a1)));
        m.w2.iter_mut().for_each(|w| *w = R::of(rng.random_range(-a2..a2)));
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Returns `(hidden activations, output)`.
    pub fn forward(&self, x: &[R]) -> (Vec<R>, Vec<R>) {
        debug_assert_eq!(x.len(), self.input);
        let mut h = self.b1.clone();
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.input..(j + 1) * self.input];
            let mut acc = *hj;
            for (w, xi) in row.iter().zip(x) {
                acc += *w * *xi;
            }
            *hj = acc.max(R::zero());
        }
        let mut y = self.b2.clone();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            let mut acc = *yo;
            for (w, hj) in row.iter().zip(&h) {
                acc += *w * *hj;
            }
            *yo = acc;
        }
        (h, y)
    }

    /// Accumulates parameter gradients into `grad` and returns `d loss / d x`.
    pub fn backward(&self, x: &[R], hidden: &[R], d_out: &[R], grad: &mut Mlp<R>) -> Vec<R> {
        let mut d_h = vec![R::zero(); self.hidden];
        for (o, &dy) in d_out.iter().enumerate() {
            if dy == R::zero() {
                continue;
            }
            grad.b2[o] += dy;
            let row = o * self.hidden;
            for j in 0..self.hidden {
                grad.w2[row + j] += dy * hidden[j];
                d_h[j] += dy * self.w2[row + j];
            }
        }
        let mut d_x = vec![R::zero(); self.input];
        for j in 0..self.hidden {
            // rectifier: zero gradient where the unit was inactive
            if hidden[j] <= R::zero() || d_h[j] == R::zero() {
                continue;
            }
            let dz = d_h[j];
            grad.b1[j] += dz;
            let row = j * self.input;
            for i in 0..self.input {
                grad.w1[row + i] += dz * x[i];
                d_x[i] += dz * self.w1[row + i];
            }
        }
        d_x
    }

    pub fn params(&self) -> [&[R]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> [&mut Vec<R>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn add_assign(&mut self, other: &Mlp<R>) {
        for (a, b) in self.params_mut().into_iter().zip(other.params()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
        }
    }
}
