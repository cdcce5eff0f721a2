//! Reverse-mode differentiation over a recorded operation tape.
//!
//! A [`Tape`] owns every tensor it touches; operations append nodes in
//! topological order and [`Tape::backward`] walks them in reverse. The op set
//! mirrors [`super::ops`] plus the scalar/batch-loss ops training needs.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::{ops, Tensor};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<F: Real> {
    Leaf,
    Depthwise { input: Var, kernels: Var, bias: Option<Var>, padding: usize },
    Pointwise { input: Var, kernels: Var, bias: Option<Var> },
    Standard { input: Var, kernels: Var, bias: Option<Var>, padding: usize },
    Mfm { input: Var },
    MaxPool { input: Var },
    Crop { input: Var },
    Flatten { input: Var },
    Linear { input: Var, weight: Var, bias: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { input: Var, factor: F },
    Sum { input: Var },
    /// `a + factor·b`, the Eq. 6 combination.
    AddScaled { a: Var, b: Var, factor: F },
    /// Batch-mean class-balanced cross-entropy over per-sample logits.
    CbCeBatch { logits: Vec<Var>, labels: Vec<usize>, weights: Vec<F>, tau: F },
    /// Batch-mean τ²·KL(teacher ‖ softened current); teachers are constants.
    SkdKlBatch { logits: Vec<Var>, teacher: Vec<Vec<F>>, tau: F },
}

#[derive(Debug)]
struct Node<F: Real> {
    shape: Vec<usize>,
    value: Vec<F>,
    grad: Option<Vec<F>>,
    requires_grad: bool,
    op: Op<F>,
}

/// Ordered list of recorded operations; inputs always precede their uses.
#[derive(Debug, Default)]
pub struct Tape<F: Real> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Tape<F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a copy of `t` as a leaf, keeping its `requires_grad` flag.
    pub fn leaf(&mut self, t: &Tensor<F>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), t.requires_grad(), Op::Leaf)
    }

    /// Registers a leaf that never receives gradient.
    pub fn constant(&mut self, t: &Tensor<F>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), false, Op::Leaf)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[F] {
        &self.nodes[v.0].value
    }

    /// Clones the node out as a plain tensor (without grad).
    pub fn tensor(&self, v: Var) -> Tensor<F> {
        Tensor::new(self.nodes[v.0].shape.clone(), self.nodes[v.0].value.clone())
            .expect("tape nodes hold consistent shapes")
    }

    /// Gradient accumulated on a node, if backward has reached it.
    pub fn grad(&self, v: Var) -> Option<&[F]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<F>, requires_grad: bool, op: Op<F>) -> Var {
        self.nodes.push(Node { shape, value, grad: None, requires_grad, op });
        Var(self.nodes.len() - 1)
    }

    fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn any_needs_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.needs_grad(*v))
    }

    // -- recorded operations -------------------------------------------------

    fn node_shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    fn node_value(&self, v: Var) -> &[F] {
        &self.nodes[v.0].value
    }

    pub fn conv2d_depthwise(&mut self, input: Var, kernels: Var, bias: Option<Var>, padding: usize) -> Result<Var> {
        let (c, oh, ow) = ops::depthwise_out_shape(
            self.node_shape(input),
            self.node_shape(kernels),
            bias.map(|b| self.node_shape(b)),
            padding,
        )?;
        let (h, w) = (self.node_shape(input)[1], self.node_shape(input)[2]);
        let k = self.node_shape(kernels)[1];
        let mut out = vec![F::zero(); c * oh * ow];
        ops::depthwise_forward(
            self.node_value(input),
            (c, h, w),
            self.node_value(kernels),
            k,
            bias.map(|b| self.node_value(b)),
            padding,
            &mut out,
            (oh, ow),
        );
        let rg = self.needs_grad(input) || self.needs_grad(kernels) || bias.is_some_and(|b| self.needs_grad(b));
        Ok(self.push(vec![c, oh, ow], out, rg, Op::Depthwise { input, kernels, bias, padding }))
    }

    pub fn conv2d_pointwise(&mut self, input: Var, kernels: Var, bias: Option<Var>) -> Result<Var> {
        let (co, h, w) = ops::pointwise_out_shape(
            self.node_shape(input),
            self.node_shape(kernels),
            bias.map(|b| self.node_shape(b)),
        )?;
        let ci = self.node_shape(input)[0];
        let mut out = vec![F::zero(); co * h * w];
        ops::pointwise_forward(
            self.node_value(input),
            (ci, h, w),
            self.node_value(kernels),
            co,
            bias.map(|b| self.node_value(b)),
            &mut out,
        );
        let rg = self.needs_grad(input) || self.needs_grad(kernels) || bias.is_some_and(|b| self.needs_grad(b));
        Ok(self.push(vec![co, h, w], out, rg, Op::Pointwise { input, kernels, bias }))
    }

    pub fn conv2d_standard(&mut self, input: Var, kernels: Var, bias: Option<Var>, padding: usize) -> Result<Var> {
        let (co, oh, ow, k) = ops::standard_out_shape(
            self.node_shape(input),
            self.node_shape(kernels),
            bias.map(|b| self.node_shape(b)),
            padding,
        )?;
        let (ci, h, w) = (self.node_shape(input)[0], self.node_shape(input)[1], self.node_shape(input)[2]);
        let mut out = vec![F::zero(); co * oh * ow];
        ops::standard_forward(
            self.node_value(input),
            (ci, h, w),
            self.node_value(kernels),
            co,
            k,
            bias.map(|b| self.node_value(b)),
            padding,
            &mut out,
            (oh, ow),
        );
        let rg = self.needs_grad(input) || self.needs_grad(kernels) || bias.is_some_and(|b| self.needs_grad(b));
        Ok(self.push(vec![co, oh, ow], out, rg, Op::Standard { input, kernels, bias, padding }))
    }

    pub fn mfm_max(&mut self, input: Var) -> Result<Var> {
        let (half, h, w) = ops::mfm_out_shape(self.node_shape(input))?;
        let c = self.node_shape(input)[0];
        let mut out = vec![F::zero(); half * h * w];
        ops::mfm_forward(self.node_value(input), (c, h, w), &mut out);
        let rg = self.needs_grad(input);
        Ok(self.push(vec![half, h, w], out, rg, Op::Mfm { input }))
    }

    pub fn maxpool2x2(&mut self, input: Var) -> Result<Var> {
        let (c, oh, ow) = ops::maxpool_out_shape(self.node_shape(input))?;
        let (h, w) = (self.node_shape(input)[1], self.node_shape(input)[2]);
        let mut out = vec![F::zero(); c * oh * ow];
        ops::maxpool_forward(self.node_value(input), (c, h, w), &mut out);
        let rg = self.needs_grad(input);
        Ok(self.push(vec![c, oh, ow], out, rg, Op::MaxPool { input }))
    }

    pub fn crop2d(&mut self, input: Var, oh: usize, ow: usize) -> Result<Var> {
        let (c, h, w) = ops::crop_out_shape(self.node_shape(input), oh, ow)?;
        let mut out = vec![F::zero(); c * oh * ow];
        ops::crop_forward(self.node_value(input), (c, h, w), (oh, ow), &mut out);
        let rg = self.needs_grad(input);
        Ok(self.push(vec![c, oh, ow], out, rg, Op::Crop { input }))
    }

    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let n = self.nodes[input.0].value.len();
        let value = self.nodes[input.0].value.clone();
        let rg = self.needs_grad(input);
        Ok(self.push(vec![n], value, rg, Op::Flatten { input }))
    }

    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (d, m) =
            ops::linear_out_shape(self.node_shape(input), self.node_shape(weight), self.node_shape(bias))?;
        let mut out = vec![F::zero(); m];
        ops::linear_forward(self.node_value(input), self.node_value(weight), self.node_value(bias), d, m, &mut out);
        let rg = self.any_needs_grad(&[input, weight, bias]);
        Ok(self.push(vec![m], out, rg, Op::Linear { input, weight, bias }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value: Vec<F> = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| *x + *y).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.any_needs_grad(&[a, b]);
        Ok(self.push(shape, value, rg, Op::Add { a, b }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value: Vec<F> = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| *x * *y).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.any_needs_grad(&[a, b]);
        Ok(self.push(shape, value, rg, Op::Mul { a, b }))
    }

    pub fn scale(&mut self, input: Var, factor: F) -> Result<Var> {
        let value: Vec<F> = self.nodes[input.0].value.iter().map(|x| *x * factor).collect();
        let shape = self.nodes[input.0].shape.clone();
        let rg = self.needs_grad(input);
        Ok(self.push(shape, value, rg, Op::Scale { input, factor }))
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let total: F = self.nodes[input.0].value.iter().copied().sum();
        let rg = self.needs_grad(input);
        Ok(self.push(vec![1], vec![total], rg, Op::Sum { input }))
    }

    /// `a + factor·b` — the Eq. 6 total with `factor = λ`.
    pub fn add_scaled(&mut self, a: Var, b: Var, factor: F) -> Result<Var> {
        self.same_shape("add_scaled", a, b)?;
        let value: Vec<F> =
            self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| *x + factor * *y).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.any_needs_grad(&[a, b]);
        Ok(self.push(shape, value, rg, Op::AddScaled { a, b, factor }))
    }

    /// Mean over samples of `w_i · (−log softmax_τ(z_i)[y_i])`.
    ///
    /// `weights[i]` is the precomputed class-balance coefficient of sample
    /// `i`'s true class.
    pub fn cb_ce_batch(&mut self, logits: &[Var], labels: &[usize], weights: &[F], tau: F) -> Result<Var> {
        const OP: &str = "cb_ce_batch";
        if tau <= F::zero() {
            return Err(Error::invalid(OP, format!("tau must be > 0, got {tau}")));
        }
        if logits.is_empty() || logits.len() != labels.len() || logits.len() != weights.len() {
            return Err(Error::invalid(
                OP,
                format!("lists must be non-empty and equal length: {} logits, {} labels, {} weights",
                    logits.len(), labels.len(), weights.len()),
            ));
        }
        let m = self.expect_logit_vectors(OP, logits)?;
        for (i, &y) in labels.iter().enumerate() {
            if y >= m {
                return Err(Error::invalid(OP, format!("label {y} of sample {i} out of range for {m} classes")));
            }
        }
        let n = F::from_f64_c(logits.len() as f64);
        let mut total = F::zero();
        for (i, v) in logits.iter().enumerate() {
            let lp = log_softmax(&self.nodes[v.0].value, tau);
            total += weights[i] * -lp[labels[i]];
        }
        let value = total / n;
        let rg = self.any_needs_grad(logits);
        Ok(self.push(
            vec![1],
            vec![value],
            rg,
            Op::CbCeBatch { logits: logits.to_vec(), labels: labels.to_vec(), weights: weights.to_vec(), tau },
        ))
    }

    /// Mean over samples of `τ²·KL(teacher_i ‖ softmax_τ(z_i))`.
    ///
    /// Teachers enter as plain probability vectors; no gradient ever flows
    /// into them.
    pub fn skd_kl_batch(&mut self, logits: &[Var], teacher: &[Vec<F>], tau: F) -> Result<Var> {
        const OP: &str = "skd_kl_batch";
        if tau <= F::zero() {
            return Err(Error::invalid(OP, format!("tau must be > 0, got {tau}")));
        }
        if logits.is_empty() || logits.len() != teacher.len() {
            return Err(Error::invalid(
                OP,
                format!("lists must be non-empty and equal length: {} logits, {} teachers", logits.len(), teacher.len()),
            ));
        }
        let m = self.expect_logit_vectors(OP, logits)?;
        for (i, q) in teacher.iter().enumerate() {
            if q.len() != m {
                return Err(Error::shape(OP, format!("teacher {i} has {} entries, logits have {m}", q.len())));
            }
        }
        let n = F::from_f64_c(logits.len() as f64);
        let tau2 = tau * tau;
        let mut total = F::zero();
        for (v, q) in logits.iter().zip(teacher) {
            let lp = log_softmax(&self.nodes[v.0].value, tau);
            let mut kl = F::zero();
            for (qj, lpj) in q.iter().zip(&lp) {
                if *qj > F::zero() {
                    kl += *qj * (qj.ln() - *lpj);
                }
            }
            // Same roundoff guard as the pure skd_kl_loss.
            total += tau2 * kl.max(F::zero());
        }
        let value = total / n;
        let rg = self.any_needs_grad(logits);
        Ok(self.push(vec![1], vec![value], rg, Op::SkdKlBatch { logits: logits.to_vec(), teacher: teacher.to_vec(), tau }))
    }

    fn expect_logit_vectors(&self, op: &'static str, logits: &[Var]) -> Result<usize> {
        let m = match self.nodes[logits[0].0].shape.as_slice() {
            [m] => *m,
            s => return Err(Error::shape(op, format!("logits must be rank 1 [M], got {s:?}"))),
        };
        for (i, v) in logits.iter().enumerate() {
            if self.nodes[v.0].shape != [m] {
                return Err(Error::shape(
                    op,
                    format!("logits {i} has shape {:?}, expected [{m}]", self.nodes[v.0].shape),
                ));
            }
        }
        Ok(m)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(Error::shape(
                op,
                format!("operands differ: {:?} vs {:?}", self.nodes[a.0].shape, self.nodes[b.0].shape),
            ));
        }
        Ok(())
    }

    // -- backward ------------------------------------------------------------

    /// Reverse pass from a scalar loss. Adjoints of this call are added into
    /// each node's persistent `grad` buffer, so repeated calls accumulate
    /// until [`Tape::zero_grads`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].shape != [1] {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar [1], got {:?}", self.nodes[loss.0].shape),
            ));
        }
        let mut adj: Vec<Option<Vec<F>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(vec![F::one()]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(out_adj) = adj[i].take() else { continue };
            let op = self.nodes[i].op.clone();
            self.propagate(&op, i, &out_adj, &mut adj)?;
            let node = &mut self.nodes[i];
            let grad = node.grad.get_or_insert_with(|| vec![F::zero(); node.value.len()]);
            for (g, a) in grad.iter_mut().zip(&out_adj) {
                *g += *a;
            }
        }
        Ok(())
    }

    fn adj_slot<'a>(adj: &'a mut [Option<Vec<F>>], v: Var, len: usize) -> &'a mut [F] {
        adj[v.0].get_or_insert_with(|| vec![F::zero(); len]).as_mut_slice()
    }

    fn propagate(&self, op: &Op<F>, node_idx: usize, go: &[F], adj: &mut [Option<Vec<F>>]) -> Result<()> {
        match op {
            Op::Leaf => {}
            Op::Depthwise { input, kernels, bias, padding } => {
                let (c, h, w) = shape3(&self.nodes[input.0].shape);
                let k = self.nodes[kernels.0].shape[1];
                let (oh, ow) = (self.nodes[node_idx].shape[1], self.nodes[node_idx].shape[2]);
                // Split borrows: compute into fresh buffers, then merge.
                let mut gi = self.needs_grad(*input).then(|| vec![F::zero(); self.nodes[input.0].value.len()]);
                let mut gk = self.needs_grad(*kernels).then(|| vec![F::zero(); self.nodes[kernels.0].value.len()]);
                let mut gb = bias
                    .filter(|b| self.needs_grad(*b))
                    .map(|b| vec![F::zero(); self.nodes[b.0].value.len()]);
                ops::depthwise_backward(
                    &self.nodes[input.0].value,
                    (c, h, w),
                    &self.nodes[kernels.0].value,
                    k,
                    *padding,
                    go,
                    (oh, ow),
                    gi.as_deref_mut(),
                    gk.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                merge(adj, *input, gi);
                merge(adj, *kernels, gk);
                if let (Some(b), Some(gbv)) = (bias, gb) {
                    merge(adj, *b, Some(gbv));
                }
            }
            Op::Pointwise { input, kernels, bias } => {
                let (ci, h, w) = shape3(&self.nodes[input.0].shape);
                let co = self.nodes[kernels.0].shape[0];
                let mut gi = self.needs_grad(*input).then(|| vec![F::zero(); self.nodes[input.0].value.len()]);
                let mut gk = self.needs_grad(*kernels).then(|| vec![F::zero(); self.nodes[kernels.0].value.len()]);
                let mut gb = bias
                    .filter(|b| self.needs_grad(*b))
                    .map(|b| vec![F::zero(); self.nodes[b.0].value.len()]);
                ops::pointwise_backward(
                    &self.nodes[input.0].value,
                    (ci, h, w),
                    &self.nodes[kernels.0].value,
                    co,
                    go,
                    gi.as_deref_mut(),
                    gk.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                merge(adj, *input, gi);
                merge(adj, *kernels, gk);
                if let (Some(b), Some(gbv)) = (bias, gb) {
                    merge(adj, *b, Some(gbv));
                }
            }
            Op::Standard { input, kernels, bias, padding } => {
                let (ci, h, w) = shape3(&self.nodes[input.0].shape);
                let co = self.nodes[kernels.0].shape[0];
                let k = self.nodes[kernels.0].shape[2];
                let (oh, ow) = (self.nodes[node_idx].shape[1], self.nodes[node_idx].shape[2]);
                let mut gi = self.needs_grad(*input).then(|| vec![F::zero(); self.nodes[input.0].value.len()]);
                let mut gk = self.needs_grad(*kernels).then(|| vec![F::zero(); self.nodes[kernels.0].value.len()]);
                let mut gb = bias
                    .filter(|b| self.needs_grad(*b))
                    .map(|b| vec![F::zero(); self.nodes[b.0].value.len()]);
                ops::standard_backward(
                    &self.nodes[input.0].value,
                    (ci, h, w),
                    &self.nodes[kernels.0].value,
                    co,
                    k,
                    *padding,
                    go,
                    (oh, ow),
                    gi.as_deref_mut(),
                    gk.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                merge(adj, *input, gi);
                merge(adj, *kernels, gk);
                if let (Some(b), Some(gbv)) = (bias, gb) {
                    merge(adj, *b, Some(gbv));
                }
            }
            Op::Mfm { input } => {
                if self.needs_grad(*input) {
                    let (c, h, w) = shape3(&self.nodes[input.0].shape);
                    let gi = Self::adj_slot(adj, *input, c * h * w);
                    ops::mfm_backward(&self.nodes[input.0].value, (c, h, w), go, gi);
                }
            }
            Op::MaxPool { input } => {
                if self.needs_grad(*input) {
                    let (c, h, w) = shape3(&self.nodes[input.0].shape);
                    let gi = Self::adj_slot(adj, *input, c * h * w);
                    ops::maxpool_backward(&self.nodes[input.0].value, (c, h, w), go, gi);
                }
            }
            Op::Crop { input } => {
                if self.needs_grad(*input) {
                    let (c, h, w) = shape3(&self.nodes[input.0].shape);
                    let (oh, ow) = (self.nodes[node_idx].shape[1], self.nodes[node_idx].shape[2]);
                    let gi = Self::adj_slot(adj, *input, c * h * w);
                    ops::crop_backward((c, h, w), (oh, ow), go, gi);
                }
            }
            Op::Flatten { input } => {
                if self.needs_grad(*input) {
                    let len = self.nodes[input.0].value.len();
                    let gi = Self::adj_slot(adj, *input, len);
                    for (g, a) in gi.iter_mut().zip(go) {
                        *g += *a;
                    }
                }
            }
            Op::Linear { input, weight, bias } => {
                let d = self.nodes[input.0].value.len();
                let m = self.nodes[bias.0].value.len();
                let mut gi = self.needs_grad(*input).then(|| vec![F::zero(); d]);
                let mut gw = self.needs_grad(*weight).then(|| vec![F::zero(); d * m]);
                let mut gb = self.needs_grad(*bias).then(|| vec![F::zero(); m]);
                ops::linear_backward(
                    &self.nodes[input.0].value,
                    &self.nodes[weight.0].value,
                    d,
                    m,
                    go,
                    gi.as_deref_mut(),
                    gw.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                merge(adj, *input, gi);
                merge(adj, *weight, gw);
                merge(adj, *bias, gb);
            }
            Op::Add { a, b } => {
                for v in [a, b] {
                    if self.needs_grad(*v) {
                        let len = self.nodes[v.0].value.len();
                        let g = Self::adj_slot(adj, *v, len);
                        for (g, go) in g.iter_mut().zip(go) {
                            *g += *go;
                        }
                    }
                }
            }
            Op::Mul { a, b } => {
                if self.needs_grad(*a) {
                    let bv = self.nodes[b.0].value.clone();
                    let g = Self::adj_slot(adj, *a, bv.len());
                    for ((g, go), bv) in g.iter_mut().zip(go).zip(&bv) {
                        *g += *go * *bv;
                    }
                }
                if self.needs_grad(*b) {
                    let av = self.nodes[a.0].value.clone();
                    let g = Self::adj_slot(adj, *b, av.len());
                    for ((g, go), av) in g.iter_mut().zip(go).zip(&av) {
                        *g += *go * *av;
                    }
                }
            }
            Op::Scale { input, factor } => {
                if self.needs_grad(*input) {
                    let len = self.nodes[input.0].value.len();
                    let g = Self::adj_slot(adj, *input, len);
                    for (g, go) in g.iter_mut().zip(go) {
                        *g += *go * *factor;
                    }
                }
            }
            Op::Sum { input } => {
                if self.needs_grad(*input) {
                    let len = self.nodes[input.0].value.len();
                    let g = Self::adj_slot(adj, *input, len);
                    for gv in g.iter_mut() {
                        *gv += go[0];
                    }
                }
            }
            Op::AddScaled { a, b, factor } => {
                if self.needs_grad(*a) {
                    let len = self.nodes[a.0].value.len();
                    let g = Self::adj_slot(adj, *a, len);
                    for (g, go) in g.iter_mut().zip(go) {
                        *g += *go;
                    }
                }
                if self.needs_grad(*b) {
                    let len = self.nodes[b.0].value.len();
                    let g = Self::adj_slot(adj, *b, len);
                    for (g, go) in g.iter_mut().zip(go) {
                        *g += *go * *factor;
                    }
                }
            }
            Op::CbCeBatch { logits, labels, weights, tau } => {
                let n = F::from_f64_c(logits.len() as f64);
                for ((v, &y), &wgt) in logits.iter().zip(labels).zip(weights) {
                    if !self.needs_grad(*v) {
                        continue;
                    }
                    let p = softmax(&self.nodes[v.0].value, *tau);
                    let scale = go[0] * wgt / (n * *tau);
                    let g = Self::adj_slot(adj, *v, p.len());
                    for (j, (g, pj)) in g.iter_mut().zip(&p).enumerate() {
                        let delta = if j == y { F::one() } else { F::zero() };
                        *g += scale * (*pj - delta);
                    }
                }
            }
            Op::SkdKlBatch { logits, teacher, tau } => {
                let n = F::from_f64_c(logits.len() as f64);
                for (v, q) in logits.iter().zip(teacher) {
                    if !self.needs_grad(*v) {
                        continue;
                    }
                    let p = softmax(&self.nodes[v.0].value, *tau);
                    let scale = go[0] * *tau / n;
                    let g = Self::adj_slot(adj, *v, p.len());
                    for ((g, pj), qj) in g.iter_mut().zip(&p).zip(q) {
                        *g += scale * (*pj - *qj);
                    }
                }
            }
        }
        Ok(())
    }
}

fn shape3(shape: &[usize]) -> (usize, usize, usize) {
    (shape[0], shape[1], shape[2])
}

fn merge<F: Real>(adj: &mut [Option<Vec<F>>], v: Var, delta: Option<Vec<F>>) {
    let Some(delta) = delta else { return };
    match &mut adj[v.0] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(&delta) {
                *e += *d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

/// Max-subtracted `softmax(z/τ)`.
pub(crate) fn softmax<F: Real>(z: &[F], tau: F) -> Vec<F> {
    let scaled: Vec<F> = z.iter().map(|v| *v / tau).collect();
    let max = scaled.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = scaled.iter().map(|v| (*v - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.iter().map(|e| *e / total).collect()
}

/// Max-subtracted `log softmax(z/τ)`.
pub(crate) fn log_softmax<F: Real>(z: &[F], tau: F) -> Vec<F> {
    let scaled: Vec<F> = z.iter().map(|v| *v / tau).collect();
    let max = scaled.iter().copied().fold(F::neg_infinity(), F::max);
    let lse: F = scaled.iter().map(|v| (*v - max).exp()).sum::<F>().ln() + max;
    scaled.iter().map(|v| *v - lse).collect()
}
