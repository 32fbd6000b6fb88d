use crate::data::{EOS, PAD};
use crate::decoder::CaptionTokens;
use crate::error::{Error, Result};

/// Right-pads every caption with PAD to the longest one.
pub fn pad_captions(captions: &[CaptionTokens]) -> Vec<Vec<usize>> {
    let width = captions.iter().map(|c| c.indices().len()).max().unwrap_or(0);
    captions
        .iter()
        .map(|c| {
            let mut row = c.indices().to_vec();
            row.resize(width, PAD);
            row
        })
        .collect()
}

/// Inverse of [`pad_captions`] for one row: drops everything after EOS,
/// which must be PAD.
pub fn unpad(row: &[usize], vocab_size: usize) -> Result<CaptionTokens> {
    let end = row
        .iter()
        .position(|&t| t == EOS)
        .ok_or_else(|| Error::config(format!("padded row has no EOS: {row:?}")))?;
    if row[end + 1..].iter().any(|&t| t != PAD) {
        return Err(Error::config(format!("non-PAD token after EOS: {row:?}")));
    }
    CaptionTokens::new(row[..=end].to_vec(), vocab_size)
}

/// Groups item indices into batches of similar caption length: items are
/// stably sorted by length (keeping the given order within a length),
/// chunked, and the chunks returned in that order.
pub fn bucket_batches(order: &[usize], lengths: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut sorted = order.to_vec();
    sorted.sort_by_key(|&i| lengths[i]);
    sorted.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}
