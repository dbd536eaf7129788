use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, contiguous, non-empty frame intervals covering `[0, n_frames)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSegmentation", into = "RawSegmentation")]
pub struct SceneSegmentation {
    intervals: Vec<(usize, usize)>,
    n_frames: usize,
}

#[derive(Serialize, Deserialize)]
struct RawSegmentation {
    n_frames: usize,
    intervals: Vec<(usize, usize)>,
}

impl TryFrom<RawSegmentation> for SceneSegmentation {
    type Error = Error;

    fn try_from(raw: RawSegmentation) -> Result<Self> {
        SceneSegmentation::new(raw.intervals, raw.n_frames)
    }
}

impl From<SceneSegmentation> for RawSegmentation {
    fn from(seg: SceneSegmentation) -> Self {
        RawSegmentation {
            n_frames: seg.n_frames,
            intervals: seg.intervals,
        }
    }
}

impl SceneSegmentation {
    pub fn new(intervals: Vec<(usize, usize)>, n_frames: usize) -> Result<Self> {
        if n_frames == 0 || intervals.is_empty() {
            return Err(Error::invalid("segmentation must cover at least one frame"));
        }
        let mut cursor = 0;
        for &(start, end) in &intervals {
            if start != cursor {
                return Err(Error::invalid(format!(
                    "interval [{start},{end}) does not start at frame {cursor}"
                )));
            }
            if end <= start {
                return Err(Error::invalid(format!("empty interval [{start},{end})")));
            }
            cursor = end;
        }
        if cursor != n_frames {
            return Err(Error::invalid(format!(
                "intervals end at {cursor}, expected {n_frames}"
            )));
        }
        Ok(Self { intervals, n_frames })
    }

    pub fn single(n_frames: usize) -> Result<Self> {
        Self::new(vec![(0, n_frames)], n_frames)
    }

    /// Boundary `t` splits between frames `t` and `t + 1`.
    pub fn from_boundaries(boundaries: &[usize], n_frames: usize) -> Result<Self> {
        let mut intervals = Vec::with_capacity(boundaries.len() + 1);
        let mut start = 0;
        for &b in boundaries {
            if b < start || b + 1 >= n_frames {
                return Err(Error::invalid(format!(
                    "boundary {b} out of order or outside {n_frames} frames"
                )));
            }
            intervals.push((start, b + 1));
            start = b + 1;
        }
        intervals.push((start, n_frames));
        Self::new(intervals, n_frames)
    }

    /// Build from interval lengths laid end to end.
    pub fn from_lengths(lengths: &[usize]) -> Result<Self> {
        let mut intervals = Vec::with_capacity(lengths.len());
        let mut start = 0;
        for &len in lengths {
            intervals.push((start, start + len));
            start += len;
        }
        Self::new(intervals, start)
    }

    pub fn intervals(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.intervals.iter().map(|&(s, e)| s..e)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Last frame of every interval except the final one.
    pub fn boundaries(&self) -> Vec<usize> {
        self.intervals[..self.intervals.len() - 1]
            .iter()
            .map(|&(_, e)| e - 1)
            .collect()
    }

    /// Real-valued scene midpoints `(start + end - 1) / 2`.
    pub fn midpoints(&self) -> Vec<f64> {
        self.intervals.iter().map(|&(s, e)| (s + e - 1) as f64 / 2.0).collect()
    }

    /// Scene index for every frame.
    pub fn frame_labels(&self) -> Vec<usize> {
        let mut labels = Vec::with_capacity(self.n_frames);
        for (i, &(s, e)) in self.intervals.iter().enumerate() {
            labels.extend(std::iter::repeat_n(i, e - s));
        }
        labels
    }
}
