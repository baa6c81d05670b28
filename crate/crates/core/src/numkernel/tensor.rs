use crate::error::{Error, Result};
use crate::numkernel::{matmul_into, C64};

/// Dense complex tensor in row-major layout (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let n = numel(&shape);
        if shape.contains(&0) {
            return Err(Error::Dimension(format!("zero-length axis in shape {shape:?}")));
        }
        if n != data.len() {
            return Err(Error::Dimension(format!("shape {shape:?} holds {n} entries, data has {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = numel(&shape);
        Self { shape, data: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn scalar(v: C64) -> Self {
        Self { shape: Vec::new(), data: vec![v] }
    }

    pub fn from_real(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(shape, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let n = numel(&shape);
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (i, s) in idx.iter().zip(&self.shape) {
            off = off * s + i;
        }
        self.data[off]
    }

    /// Value of a rank-0 (or single-entry) tensor.
    pub fn to_scalar(&self) -> Result<C64> {
        if self.data.len() != 1 {
            return Err(Error::Dimension(format!("tensor of shape {:?} is not a scalar", self.shape)));
        }
        Ok(self.data[0])
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if numel(&shape) != self.data.len() {
            return Err(Error::Dimension(format!("cannot reshape {:?} into {shape:?}", self.shape)));
        }
        self.shape = shape;
        Ok(self)
    }

    /// Axis permutation: output axis `i` is input axis `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_perm(perm, self.rank())?;
        let shape = perm.iter().map(|&p| self.shape[p]).collect();
        Ok(Self { shape, data: permuted(&self.data, &self.shape, perm) })
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, a: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z * a).collect() }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "shape mismatch in max_abs_diff");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Outer product; axes ordered (self..., other...).
    pub fn outer(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.len() * other.len());
        for a in &self.data {
            data.extend(other.data.iter().map(|b| a * b));
        }
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        Self { shape, data }
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_perm(perm: &[usize], rank: usize) -> Result<()> {
    let mut seen = vec![false; rank];
    if perm.len() != rank {
        return Err(Error::Dimension(format!("permutation {perm:?} has wrong length for rank {rank}")));
    }
    for &p in perm {
        if p >= rank || seen[p] {
            return Err(Error::Dimension(format!("{perm:?} is not a permutation of 0..{rank}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Row-major transposition. Runs of input axes that stay adjacent and in order
/// are merged first so the inner loop is as long as possible.
pub(crate) fn permuted(data: &[C64], shape: &[usize], perm: &[usize]) -> Vec<C64> {
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return data.to_vec();
    }
    // merge consecutive runs
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &p in perm {
        match groups.last_mut() {
            Some(g) if *g.last().unwrap() + 1 == p => g.push(p),
            _ => groups.push(vec![p]),
        }
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by_key(|&g| groups[g][0]);
    // merged input shape, in input order
    let mut in_dims = vec![0usize; groups.len()];
    for &g in &order {
        in_dims[g] = groups[g].iter().map(|&a| shape[a]).product();
    }
    let mut in_strides = vec![0usize; groups.len()];
    let mut s = 1;
    for &g in order.iter().rev() {
        in_strides[g] = s;
        s *= in_dims[g];
    }
    // output walks groups in perm order
    let dims: Vec<usize> = in_dims.clone();
    let strides: Vec<usize> = in_strides.clone();
    let r = dims.len();
    let inner_dim = dims[r - 1];
    let inner_stride = strides[r - 1];
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0usize; r];
    let mut base = 0usize;
    while out.len() < n {
        if inner_stride == 1 {
            out.extend_from_slice(&data[base..base + inner_dim]);
        } else {
            let mut off = base;
            for _ in 0..inner_dim {
                out.push(data[off]);
                off += inner_stride;
            }
        }
        let mut ax = r - 1;
        loop {
            if ax == 0 {
                break;
            }
            ax -= 1;
            idx[ax] += 1;
            base += strides[ax];
            if idx[ax] < dims[ax] {
                break;
            }
            base -= strides[ax] * dims[ax];
            idx[ax] = 0;
        }
    }
    out
}

/// Contracts `pairs` of axes between `a` and `b`; the result carries the free
/// axes of `a` followed by the free axes of `b`, each in original order.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(i, j) in pairs {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::Dimension(format!("axis pair ({i},{j}) out of range")));
        }
        if used_a[i] || used_b[j] {
            return Err(Error::Dimension(format!("axis pair ({i},{j}) repeats an axis")));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::Dimension(format!(
                "contracted axes a[{i}]={} and b[{j}]={} differ",
                a.shape[i], b.shape[j]
            )));
        }
        used_a[i] = true;
        used_b[j] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&j| !used_b[j]).collect();
    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let n: usize = free_b.iter().map(|&j| b.shape[j]).product();
    let k: usize = pairs.iter().map(|&(i, _)| a.shape[i]).product();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let pa = permuted(&a.data, &a.shape, &perm_a);
    let pb = permuted(&b.data, &b.shape, &perm_b);
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    matmul_into(&mut out, &pa, &pb, m, k, n);

    let shape = free_a.iter().map(|&i| a.shape[i]).chain(free_b.iter().map(|&j| b.shape[j])).collect();
    Ok(DenseTensor { shape, data: out })
}
