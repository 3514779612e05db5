//! Minimal PNG and MP4 handling for stub artifacts: signature checks, a tEXt
//! chunk writer and an ISO-BMFF container carrying clip metadata.

use super::GatewayError;

pub const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

struct Chunk<'a> {
    kind: [u8; 4],
    end: usize,
    data: &'a [u8],
}

fn png_chunks(bytes: &[u8]) -> Result<Vec<Chunk<'_>>, GatewayError> {
    let bad = |m: &str| GatewayError::Input(format!("malformed PNG: {m}"));
    if bytes.len() < 8 || bytes[..8] != PNG_SIGNATURE {
        return Err(bad("missing signature"));
    }
    let mut at = 8;
    let mut out = Vec::new();
    while at < bytes.len() {
        if at + 12 > bytes.len() {
            return Err(bad("truncated chunk header"));
        }
        let len = u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        let end = at + 12 + len;
        if end > bytes.len() {
            return Err(bad("truncated chunk"));
        }
        let kind: [u8; 4] = bytes[at + 4..at + 8].try_into().expect("4 bytes");
        let data = &bytes[at + 8..at + 8 + len];
        let crc = u32::from_be_bytes(bytes[end - 4..end].try_into().expect("4 bytes"));
        let mut h = crc32fast::Hasher::new();
        h.update(&kind);
        h.update(data);
        if h.finalize() != crc {
            return Err(bad("chunk CRC mismatch"));
        }
        out.push(Chunk {
            kind,
            end,
            data,
        });
        at = end;
    }
    match (out.first(), out.last()) {
        (Some(f), Some(l)) if &f.kind == b"IHDR" && &l.kind == b"IEND" => Ok(out),
        _ => Err(bad("IHDR/IEND missing")),
    }
}

pub fn check_png(bytes: &[u8]) -> Result<(), GatewayError> {
    png_chunks(bytes).map(|_| ())
}

/// Returns `bytes` with a tEXt chunk inserted right after IHDR.
pub fn png_with_text(bytes: &[u8], keyword: &str, text: &str) -> Result<Vec<u8>, GatewayError> {
    let chunks = png_chunks(bytes)?;
    let mut data = keyword.as_bytes().to_vec();
    data.push(0);
    data.extend_from_slice(text.as_bytes());
    let mut chunk = (data.len() as u32).to_be_bytes().to_vec();
    chunk.extend_from_slice(b"tEXt");
    chunk.extend_from_slice(&data);
    let mut h = crc32fast::Hasher::new();
    h.update(b"tEXt");
    h.update(&data);
    chunk.extend_from_slice(&h.finalize().to_be_bytes());
    let split = chunks[0].end;
    let mut out = bytes[..split].to_vec();
    out.extend_from_slice(&chunk);
    out.extend_from_slice(&bytes[split..]);
    Ok(out)
}

/// Text of the first tEXt chunk with `keyword`.
pub fn png_text(bytes: &[u8], keyword: &str) -> Option<String> {
    let chunks = png_chunks(bytes).ok()?;
    chunks.iter().filter(|c| &c.kind == b"tEXt").find_map(|c| {
        let nul = c.data.iter().position(|b| *b == 0)?;
        (&c.data[..nul] == keyword.as_bytes()).then(|| String::from_utf8_lossy(&c.data[nul + 1..]).into_owned())
    })
}

fn mp4_box(kind: &[u8; 4], payload: &[u8]) -> Vec<u8> {
    let mut out = ((payload.len() + 8) as u32).to_be_bytes().to_vec();
    out.extend_from_slice(kind);
    out.extend_from_slice(payload);
    out
}

/// An ISO-BMFF file with an `ftyp` box and a `free` box holding
/// `key=value` metadata lines. Not playable; it stands in for a clip.
pub fn stub_mp4(fps: f64, frame_count: usize, note: &str) -> Vec<u8> {
    let mut ftyp = b"isom".to_vec();
    ftyp.extend_from_slice(&0x200u32.to_be_bytes());
    ftyp.extend_from_slice(b"isommp41");
    let meta = format!("exo-stub\nfps={fps}\nframe_count={frame_count}\nnote={note}\n");
    let mut out = mp4_box(b"ftyp", &ftyp);
    out.extend(mp4_box(b"free", meta.as_bytes()));
    out
}

/// Top-level box types, in order.
pub fn mp4_boxes(bytes: &[u8]) -> Result<Vec<([u8; 4], &[u8])>, GatewayError> {
    let mut at = 0;
    let mut out = Vec::new();
    while at < bytes.len() {
        if at + 8 > bytes.len() {
            return Err(GatewayError::Input("truncated MP4 box header".into()));
        }
        let size = u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        if size < 8 || at + size > bytes.len() {
            return Err(GatewayError::Input(format!("bad MP4 box size {size}")));
        }
        let kind: [u8; 4] = bytes[at + 4..at + 8].try_into().expect("4 bytes");
        out.push((kind, &bytes[at + 8..at + size]));
        at += size;
    }
    match out.first() {
        Some((k, _)) if k == b"ftyp" => Ok(out),
        _ => Err(GatewayError::Input("MP4 does not start with ftyp".into())),
    }
}

/// (fps, frame_count) from a stub clip's metadata box.
pub fn stub_mp4_meta(bytes: &[u8]) -> Option<(f64, usize)> {
    let boxes = mp4_boxes(bytes).ok()?;
    let (_, payload) = boxes.iter().find(|(k, _)| k == b"free")?;
    let text = std::str::from_utf8(payload).ok()?;
    let get = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key)?.strip_prefix('='))
    };
    Some((get("fps")?.parse().ok()?, get("frame_count")?.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const ONE_PIXEL: &str = "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c4890000000a49444154789c63000100000500010d0a2db40000000049454e44ae426082";

    fn one_pixel() -> Vec<u8> {
        hex::decode(ONE_PIXEL.replace(' ', "")).unwrap()
    }

    #[test]
    fn png_text_round_trip() {
        let png = one_pixel();
        check_png(&png).unwrap();
        let edited = png_with_text(&png, "exo-edit", "abc").unwrap();
        check_png(&edited).unwrap();
        assert_eq!(png_text(&edited, "exo-edit").as_deref(), Some("abc"));
        assert!(check_png(b"not a png").is_err());
        let mut broken = png.clone();
        broken[20] ^= 1;
        assert!(check_png(&broken).is_err());
    }

    #[test]
    fn mp4_stub_metadata() {
        let v = stub_mp4(24.0, 240, "x");
        assert_eq!(&v[4..8], b"ftyp");
        assert_eq!(stub_mp4_meta(&v), Some((24.0, 240)));
        assert!(mp4_boxes(&v[..10]).is_err());
    }
}
