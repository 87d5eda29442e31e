//! Input helpers shared by the dump and embedding loaders.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use flate2::read::MultiGzDecoder;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Opens a text file for buffered reading, transparently inflating gzip input.
pub fn open_text(path: impl AsRef<Path>) -> io::Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    gzip_aware(BufReader::new(file))
}

/// Wraps a buffered reader, sniffing the gzip magic bytes.
pub fn gzip_aware<R: BufRead + 'static>(mut reader: R) -> io::Result<Box<dyn BufRead>> {
    let head = reader.fill_buf()?;
    if head.len() >= 2 && head[..2] == GZIP_MAGIC {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}
