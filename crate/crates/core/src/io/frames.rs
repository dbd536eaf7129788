//! Frame images on disk: a directory read in file-name order.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use crate::caption::FrameSource;
use crate::error::{BackendError, Error, Result};
use crate::scene::RgbImage;

const EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone)]
pub struct FrameStore {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl FrameStore {
    pub fn open(dir: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
                files.push(path);
            }
        }
        files.sort();
        Ok(Self {
            dir: dir.to_path_buf(),
            files,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn path(&self, index: usize) -> Result<&Path> {
        self.files
            .get(index)
            .map(PathBuf::as_path)
            .ok_or_else(|| Error::invalid(format!("frame {index} not in {}", self.dir.display())))
    }

    pub fn load(&self, index: usize) -> Result<RgbImage> {
        let path = self.path(index)?;
        let img = image::open(path)
            .map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        RgbImage::new(w as usize, h as usize, img.into_raw())
    }

    pub fn load_all(&self) -> Result<Vec<RgbImage>> {
        (0..self.len()).map(|i| self.load(i)).collect()
    }
}

impl FrameSource for FrameStore {
    fn jpeg(&self, frame_index: usize) -> std::result::Result<Vec<u8>, BackendError> {
        let frame = self
            .load(frame_index)
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let buf = image::RgbImage::from_raw(frame.width() as u32, frame.height() as u32, frame.as_raw().to_vec())
            .expect("dimensions match buffer");
        let mut out = Cursor::new(Vec::new());
        buf.write_to(&mut out, image::ImageFormat::Jpeg)
            .map_err(|e| BackendError::Config(format!("jpeg encoding failed: {e}")))?;
        Ok(out.into_inner())
    }
}

/// Write an RGB frame as PNG.
pub fn write_png(path: &Path, frame: &RgbImage) -> Result<()> {
    let buf = image::RgbImage::from_raw(frame.width() as u32, frame.height() as u32, frame.as_raw().to_vec())
        .expect("dimensions match buffer");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = RgbImage::from_fn(4, 3, |x, y| [x as u8 * 10, y as u8 * 20, 7]);
        let b = RgbImage::from_fn(4, 3, |_, _| [255, 0, 0]);
        write_png(&dir.path().join("00001.png"), &b).unwrap();
        write_png(&dir.path().join("00000.png"), &a).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let store = FrameStore::open(dir.path()).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.load(0).unwrap(), a);
        assert_eq!(store.load(1).unwrap(), b);
        let jpeg = store.jpeg(1).unwrap();
        assert_eq!(&jpeg[..2], &[0xFF, 0xD8]);
        assert!(store.load(2).is_err());
    }
}
