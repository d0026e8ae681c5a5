//! File helpers whose I/O errors name the path.

use std::fs::File;
use std::io;
use std::path::Path;

use crate::error::{Error, Result};

fn at(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(at(path))
}

pub(crate) fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(at(path))
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(at(path))
}

pub(crate) fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, data).map_err(at(path))
}

pub(crate) fn create_dir_all(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(at(path))
}
