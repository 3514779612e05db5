use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::GatewayError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MediaType {
    PngImage,
    Mp4Video,
    Text,
    MotionArchive,
    CommandStream,
    Json,
}

/// A stored artifact. `path` ends in the hex SHA-256 of the content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub path: PathBuf,
    pub digest: String,
    pub media: MediaType,
    pub bytes: u64,
    pub fps: Option<f64>,
    pub frame_count: Option<usize>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a request: kind, prompt text and input payloads, each length
/// prefixed so field boundaries cannot be confused.
pub fn request_digest(kind: &str, prompt: &str, inputs: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for part in [kind.as_bytes(), prompt.as_bytes()].into_iter().chain(inputs.iter().copied()) {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    hex::encode(h.finalize())
}

/// Content-addressed files under `<root>/objects/<2 hex>/<sha256>` plus a
/// request index under `<root>/requests/<digest>.json`.
#[derive(Debug)]
pub struct ArtifactStore {
    root: PathBuf,
    write: Mutex<()>,
}

fn io(e: std::io::Error) -> GatewayError {
    GatewayError::Io(e.to_string())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), GatewayError> {
    let dir = path.parent().expect("store paths have parents");
    fs::create_dir_all(dir).map_err(io)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("obj")
    ));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let root = root.into();
        fs::create_dir_all(root.join("objects")).map_err(io)?;
        fs::create_dir_all(root.join("requests")).map_err(io)?;
        Ok(Self {
            root,
            write: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn object_path(&self, digest: &str) -> PathBuf {
        self.root.join("objects").join(&digest[..2]).join(digest)
    }

    pub fn put(&self, bytes: &[u8], media: MediaType) -> Result<ArtifactRef, GatewayError> {
        let digest = sha256_hex(bytes);
        let path = self.object_path(&digest);
        let _guard = self.write.lock().expect("store lock");
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(ArtifactRef {
            path,
            digest,
            media,
            bytes: bytes.len() as u64,
            fps: None,
            frame_count: None,
        })
    }

    pub fn put_video(&self, bytes: &[u8], fps: f64, frame_count: usize) -> Result<ArtifactRef, GatewayError> {
        let mut r = self.put(bytes, MediaType::Mp4Video)?;
        r.fps = Some(fps);
        r.frame_count = Some(frame_count);
        Ok(r)
    }

    /// Reads the artifact and checks its digest against the file name.
    pub fn read(&self, artifact: &ArtifactRef) -> Result<Vec<u8>, GatewayError> {
        read_verified(artifact)
    }

    pub fn lookup(&self, request_digest: &str) -> Result<Option<ArtifactRef>, GatewayError> {
        let path = self.root.join("requests").join(format!("{request_digest}.json"));
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(io)?;
        let r: ArtifactRef =
            serde_json::from_str(&text).map_err(|e| GatewayError::Integrity(format!("{}: {e}", path.display())))?;
        Ok(Some(r))
    }

    pub fn remember(&self, request_digest: &str, artifact: &ArtifactRef) -> Result<(), GatewayError> {
        let path = self.root.join("requests").join(format!("{request_digest}.json"));
        let text = serde_json::to_string(artifact).expect("artifact ref serializes");
        let _guard = self.write.lock().expect("store lock");
        write_atomic(&path, text.as_bytes())
    }
}

pub fn read_verified(artifact: &ArtifactRef) -> Result<Vec<u8>, GatewayError> {
    let bytes = fs::read(&artifact.path).map_err(io)?;
    verify_bytes(artifact, &bytes)?;
    Ok(bytes)
}

pub fn verify_bytes(artifact: &ArtifactRef, bytes: &[u8]) -> Result<(), GatewayError> {
    let actual = sha256_hex(bytes);
    let named = artifact.path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if actual != artifact.digest || named != artifact.digest {
        return Err(GatewayError::Integrity(format!(
            "{} hashes to {actual}",
            artifact.path.display()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_addressing_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let r = store.put(b"hello", MediaType::Text).unwrap();
        assert_eq!(
            r.digest,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        assert!(r.path.ends_with(format!("objects/2c/{}", r.digest)));
        assert_eq!(store.read(&r).unwrap(), b"hello");
        fs::write(&r.path, b"tampered").unwrap();
        assert!(matches!(store.read(&r), Err(GatewayError::Integrity(_))));
    }

    #[test]
    fn request_index() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let d = request_digest("TEXT", "p", &[b"x"]);
        assert_ne!(d, request_digest("TEXT", "px", &[]));
        assert_eq!(store.lookup(&d).unwrap(), None);
        let r = store.put_video(b"v", 24.0, 240).unwrap();
        store.remember(&d, &r).unwrap();
        assert_eq!(store.lookup(&d).unwrap(), Some(r));
    }
}
