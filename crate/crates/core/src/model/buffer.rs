use crate::linalg::Real;

/// The `d x k` shifting memory. Column 0 is the newest entry.
///
/// Storage is column-major with the newest column first, which is also the
/// flattening order fed to the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer<T = f64> {
    d: usize,
    k: usize,
    data: Vec<T>,
}

impl<T: Real> Buffer<T> {
    pub fn zeros(d: usize, k: usize) -> Self {
        Self { d, k, data: vec![T::zero(); d * k] }
    }

    pub fn from_flat(d: usize, k: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), d * k);
        Self { d, k, data }
    }

    pub fn rows(&self) -> usize {
        self.d
    }

    pub fn capacity(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[T] {
        &self.data[j * self.d..(j + 1) * self.d]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.d..(j + 1) * self.d]
    }

    /// Flattened buffer, newest column first.
    #[inline]
    pub fn flat(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[col * self.d + row]
    }

    /// Drops the oldest column, moves every other column one step older and
    /// writes `u` as the newest.
    pub fn shift_insert(&mut self, u: &[T]) {
        assert_eq!(u.len(), self.d, "new column has wrong height");
        let d = self.d;
        self.data.copy_within(0..(self.k - 1) * d, d);
        self.data[..d].copy_from_slice(u);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Buffer<U> {
        Buffer { d: self.d, k: self.k, data: self.data.iter().map(|v| U::of(v.as_f64())).collect() }
    }
}
