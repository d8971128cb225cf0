use super::Real;

/// Dense channel-major (CHW) tensor holding one image or feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Real = f32> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, T::zero())
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: T) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Panics when `data.len() != channels * height * width`.
    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            channels * height * width,
            "tensor data length does not match {channels}x{height}x{width}"
        );
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::from_vec(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut T {
        &mut self.data[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "tensor shape mismatch in add");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Stacks `a` over `b` along the channel axis.
    pub fn concat_channels(a: &Self, b: &Self) -> Self {
        assert_eq!(
            (a.height, a.width),
            (b.height, b.width),
            "spatial mismatch in channel concat"
        );
        let mut data = Vec::with_capacity(a.len() + b.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Self::from_vec(a.channels + b.channels, a.height, a.width, data)
    }

    /// Inverse of [`Tensor::concat_channels`]: first `first` channels, rest.
    pub fn split_channels(&self, first: usize) -> (Self, Self) {
        assert!(first <= self.channels);
        let cut = first * self.plane_len();
        (
            Self::from_vec(first, self.height, self.width, self.data[..cut].to_vec()),
            Self::from_vec(
                self.channels - first,
                self.height,
                self.width,
                self.data[cut..].to_vec(),
            ),
        )
    }

    /// Copies a spatial window `[y0, y0 + h) x [x0, x0 + w)` of every channel.
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Self {
        assert!(y0 + h <= self.height && x0 + w <= self.width, "crop out of bounds");
        Self::from_fn(self.channels, h, w, |c, y, x| self.at(c, y0 + y, x0 + x))
    }

    /// Embeds the tensor into a zero canvas at offset `(y0, x0)`.
    pub fn pad(&self, y0: usize, x0: usize, height: usize, width: usize) -> Self {
        assert!(y0 + self.height <= height && x0 + self.width <= width);
        let mut out = Self::zeros(self.channels, height, width);
        for c in 0..self.channels {
            for y in 0..self.height {
                let src = (c * self.height + y) * self.width;
                let dst = (c * height + y0 + y) * width + x0;
                out.data[dst..dst + self.width].copy_from_slice(&self.data[src..src + self.width]);
            }
        }
        out
    }

    /// Repeats a single-channel tensor `n` times along the channel axis.
    pub fn repeat_channels(&self, n: usize) -> Self {
        assert_eq!(self.channels, 1, "repeat_channels expects one channel");
        let mut data = Vec::with_capacity(self.len() * n);
        for _ in 0..n {
            data.extend_from_slice(&self.data);
        }
        Self::from_vec(n, self.height, self.width, data)
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor::from_vec(
            self.channels,
            self.height,
            self.width,
            self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_then_split_restores_parts() {
        let a = Tensor::<f32>::from_fn(2, 2, 3, |c, y, x| (c * 100 + y * 10 + x) as f32);
        let b = Tensor::<f32>::from_fn(1, 2, 3, |_, y, x| -((y * 10 + x) as f32));
        let joined = Tensor::concat_channels(&a, &b);
        assert_eq!(joined.shape(), (3, 2, 3));
        let (a2, b2) = joined.split_channels(2);
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn pad_then_crop_is_identity() {
        let t = Tensor::<f32>::from_fn(2, 3, 4, |c, y, x| (c + y * 7 + x * 3) as f32);
        let padded = t.pad(1, 2, 6, 8);
        assert_eq!(padded.at(0, 0, 0), 0.0);
        assert_eq!(padded.crop(1, 2, 3, 4), t);
    }
}
