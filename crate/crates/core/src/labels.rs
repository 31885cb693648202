//! Categorical label maps and sequences of them.

use std::collections::BTreeSet;

/// One label per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height, "label buffer does not match {width}x{height}");
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Self {
        Self { width, height, data: vec![label; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn labels(&self) -> BTreeSet<u8> {
        self.data.iter().copied().collect()
    }

    /// Binary mask of the pixels whose label is in `set`.
    pub fn mask_of(&self, set: &[u8]) -> Vec<bool> {
        self.data.iter().map(|l| set.contains(l)).collect()
    }

    pub fn mask(&self, label: u8) -> Vec<bool> {
        self.data.iter().map(|&l| l == label).collect()
    }

    /// Nearest-neighbour resize with pixel-centre alignment.
    pub fn resize_nearest(&self, new_w: usize, new_h: usize) -> LabelMap {
        let pick = |d: usize, src: usize, dst: usize| (((d as f64 + 0.5) * src as f64 / dst as f64) as usize).min(src - 1);
        LabelMap::from_fn(new_w, new_h, |x, y| {
            self.get(pick(x, self.width, new_w), pick(y, self.height, new_h))
        })
    }
}

/// Per-frame label maps; `None` marks a frame without annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMaskSequence {
    frames: Vec<Option<LabelMap>>,
}

impl LabelMaskSequence {
    /// All present frames must share one size.
    pub fn new(frames: Vec<Option<LabelMap>>) -> Self {
        let mut dims = frames.iter().flatten().map(|f| (f.width, f.height));
        if let Some(first) = dims.next() {
            assert!(dims.all(|d| d == first), "label frames must share dimensions");
        }
        Self { frames }
    }

    pub fn from_maps(maps: Vec<LabelMap>) -> Self {
        Self::new(maps.into_iter().map(Some).collect())
    }

    pub fn frames(&self) -> &[Option<LabelMap>] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.iter().flatten().map(|f| (f.width, f.height)).next()
    }

    /// Labels appearing in any present frame.
    pub fn labels(&self) -> BTreeSet<u8> {
        self.frames.iter().flatten().flat_map(|f| f.data.iter().copied()).collect()
    }

    /// Maps every label through `f`.
    pub fn relabel(&self, f: impl Fn(u8) -> u8) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|m| m.as_ref().map(|m| LabelMap::new(m.width, m.height, m.data.iter().map(|&l| f(l)).collect())))
            .collect();
        Self { frames }
    }
}
