//! Estimation service wire protocol.
//!
//! Requests are `multipart/form-data` POSTs to [`BODY_PATH`] or
//! [`HANDS_PATH`] with two parts: `params`, a `key=value` text block
//! (`fps`, `frame_count`, and `facing` for hand requests), and `video`, the
//! MP4 bytes. A successful reply is `200` with a motion archive body holding
//! exactly the requested stream. Malformed requests get `400`, clips over the
//! service limit `413`, each with a plain-text reason. `GET` [`HEALTH_PATH`]
//! answers `mode=...` and `version=...` lines.

use std::fmt;

use crate::gateway::sha256_hex;
use crate::kv::KvDoc;
use crate::motion::{FacingMode, FrameClock, MotionArchive};

use super::{EstimationError, OracleConfig, ScenarioScript};
use crate::sim::HumanoidModel;

pub const BODY_PATH: &str = "/estimate/body";
pub const HANDS_PATH: &str = "/estimate/hands";
pub const HEALTH_PATH: &str = "/health";
pub const ARCHIVE_CONTENT_TYPE: &str = "application/x-exo-motion";
pub const PROTOCOL_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Body,
    Hands,
}

impl Stream {
    pub fn path(self) -> &'static str {
        match self {
            Stream::Body => BODY_PATH,
            Stream::Hands => HANDS_PATH,
        }
    }

    pub fn from_path(path: &str) -> Option<Self> {
        match path {
            BODY_PATH => Some(Stream::Body),
            HANDS_PATH => Some(Stream::Hands),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WireError {
    Malformed(String),
    TooLarge { seconds: f64, limit: f64 },
}

impl WireError {
    pub fn status(&self) -> u16 {
        match self {
            WireError::Malformed(_) => 400,
            WireError::TooLarge { .. } => 413,
        }
    }
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireError::Malformed(m) => write!(f, "malformed request: {m}"),
            WireError::TooLarge { seconds, limit } => {
                write!(f, "clip is {seconds:.2} s, limit is {limit:.2} s")
            }
        }
    }
}

impl From<WireError> for EstimationError {
    fn from(e: WireError) -> Self {
        EstimationError::Protocol(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateParams {
    pub fps: f64,
    pub frame_count: usize,
    pub facing: Option<FacingMode>,
}

impl EstimateParams {
    pub fn to_text(&self) -> String {
        let mut doc = KvDoc::new();
        doc.set("fps", self.fps);
        doc.set("frame_count", self.frame_count);
        if let Some(f) = self.facing {
            doc.set("facing", f);
        }
        doc.to_string()
    }

    pub fn parse(text: &str) -> Result<Self, WireError> {
        let doc = KvDoc::parse(text).map_err(|e| WireError::Malformed(e.to_string()))?;
        let bad = |e: String| WireError::Malformed(e);
        let fps: f64 = doc
            .get_parsed("fps")
            .map_err(|e| bad(e.to_string()))?
            .ok_or_else(|| bad("params lack fps".into()))?;
        let frame_count: usize = doc
            .get_parsed("frame_count")
            .map_err(|e| bad(e.to_string()))?
            .ok_or_else(|| bad("params lack frame_count".into()))?;
        let facing = match doc.get("facing") {
            Some(f) => Some(f.parse::<FacingMode>().map_err(|e| bad(e.to_string()))?),
            None => None,
        };
        FrameClock::new(fps, frame_count).map_err(|e| bad(e.to_string()))?;
        Ok(Self {
            fps,
            frame_count,
            facing,
        })
    }

    pub fn clock(&self) -> FrameClock {
        FrameClock::new(self.fps, self.frame_count).expect("checked on construction")
    }
}

fn find(hay: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if needle.is_empty() || hay.len() < needle.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| &hay[i..i + needle.len()] == needle)
}

/// Builds a request body. The boundary is derived from the payload digest so
/// identical requests are byte-identical.
pub fn encode_request(params: &EstimateParams, video: &[u8]) -> (String, Vec<u8>) {
    let text = params.to_text();
    let mut boundary = format!("exo-{}", &sha256_hex(video)[..32]);
    while find(video, boundary.as_bytes(), 0).is_some() || text.contains(&boundary) {
        boundary = format!("exo-{}", &sha256_hex(boundary.as_bytes())[..32]);
    }
    let mut body = Vec::with_capacity(video.len() + text.len() + 512);
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"params\"\r\nContent-Type: text/plain\r\n\r\n{text}\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(
        format!(
            "--{boundary}\r\nContent-Disposition: form-data; name=\"video\"; filename=\"clip.mp4\"\r\nContent-Type: video/mp4\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(video);
    body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

fn part_name(headers: &str) -> Option<String> {
    headers.lines().find_map(|line| {
        let (k, v) = line.split_once(':')?;
        if !k.trim().eq_ignore_ascii_case("content-disposition") {
            return None;
        }
        v.split(';').find_map(|attr| {
            let (ak, av) = attr.trim().split_once('=')?;
            (ak.trim() == "name").then(|| av.trim().trim_matches('"').to_string())
        })
    })
}

/// Splits a request body into its parameters and video bytes.
pub fn decode_request(content_type: &str, body: &[u8]) -> Result<(EstimateParams, Vec<u8>), WireError> {
    let malformed = |m: &str| WireError::Malformed(m.to_string());
    let (mime, rest) = content_type.split_once(';').ok_or_else(|| malformed("no multipart boundary"))?;
    if !mime.trim().eq_ignore_ascii_case("multipart/form-data") {
        return Err(malformed("content type is not multipart/form-data"));
    }
    let boundary = rest
        .split(';')
        .find_map(|a| a.trim().strip_prefix("boundary="))
        .map(|b| b.trim_matches('"'))
        .filter(|b| !b.is_empty())
        .ok_or_else(|| malformed("no multipart boundary"))?;
    let delim = format!("--{boundary}");
    let delim = delim.as_bytes();
    let mut pos = find(body, delim, 0).ok_or_else(|| malformed("boundary not found in body"))? + delim.len();
    let mut params = None;
    let mut video = None;
    loop {
        if body[pos..].starts_with(b"--") {
            break;
        }
        if !body[pos..].starts_with(b"\r\n") {
            return Err(malformed("bad delimiter line"));
        }
        pos += 2;
        let head_end = find(body, b"\r\n\r\n", pos).ok_or_else(|| malformed("part without header end"))?;
        let headers = std::str::from_utf8(&body[pos..head_end]).map_err(|_| malformed("part headers are not UTF-8"))?;
        let data_start = head_end + 4;
        let mut close = b"\r\n".to_vec();
        close.extend_from_slice(delim);
        let data_end = find(body, &close, data_start).ok_or_else(|| malformed("unterminated part"))?;
        let data = &body[data_start..data_end];
        match part_name(headers).as_deref() {
            Some("params") => {
                let text = std::str::from_utf8(data).map_err(|_| malformed("params are not UTF-8"))?;
                params = Some(EstimateParams::parse(text)?);
            }
            Some("video") => video = Some(data.to_vec()),
            _ => {}
        }
        pos = data_end + close.len();
    }
    let params = params.ok_or_else(|| malformed("missing params part"))?;
    let video = video.ok_or_else(|| malformed("missing video part"))?;
    if video.is_empty() {
        return Err(malformed("empty video part"));
    }
    Ok((params, video))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Health {
    pub mode: String,
    pub version: String,
}

impl Health {
    pub fn to_text(&self) -> String {
        format!("mode={}\nversion={}\n", self.mode, self.version)
    }

    pub fn parse(text: &str) -> Result<Self, EstimationError> {
        let doc = KvDoc::parse(text).map_err(|e| EstimationError::Protocol(e.to_string()))?;
        let get = |k: &str| {
            doc.get(k)
                .map(str::to_string)
                .ok_or_else(|| EstimationError::Protocol(format!("health reply lacks {k}")))
        };
        Ok(Self {
            mode: get("mode")?,
            version: get("version")?,
        })
    }
}

/// Deterministic stub reply: the straight walk oracle sized to the clip.
pub fn stub_response(stream: Stream, params: &EstimateParams) -> Result<Vec<u8>, EstimationError> {
    let facing = params.facing.unwrap_or(FacingMode::Front);
    let out = super::synthetic_oracle(
        &OracleConfig::new(ScenarioScript::walk_line()),
        params.clock(),
        facing,
        &HumanoidModel::default(),
    )?;
    let archive = match stream {
        Stream::Body => MotionArchive::from_body(&out.body, params.fps),
        Stream::Hands => MotionArchive::from_hands(&out.hands, params.fps),
    };
    Ok(archive.to_bytes())
}

/// Reference request handler with the service's status semantics; used as
/// an in-repo stand-in for the estimation service.
#[derive(Clone, Debug)]
pub struct StubService {
    pub max_clip_s: f64,
}

impl Default for StubService {
    fn default() -> Self {
        Self { max_clip_s: 60.0 }
    }
}

impl StubService {
    /// Returns (status, content type, body).
    pub fn handle(&self, method: &str, path: &str, content_type: &str, body: &[u8]) -> (u16, String, Vec<u8>) {
        let text = |status: u16, msg: String| (status, "text/plain".to_string(), msg.into_bytes());
        if path == HEALTH_PATH {
            if method != "GET" {
                return text(405, "use GET".into());
            }
            let h = Health {
                mode: "STUB".into(),
                version: PROTOCOL_VERSION.into(),
            };
            return text(200, h.to_text());
        }
        let Some(stream) = Stream::from_path(path) else {
            return text(404, format!("no such endpoint {path}"));
        };
        if method != "POST" {
            return text(405, "use POST".into());
        }
        let (params, _video) = match decode_request(content_type, body) {
            Ok(v) => v,
            Err(e) => return text(e.status(), e.to_string()),
        };
        if stream == Stream::Hands && params.facing.is_none() {
            let e = WireError::Malformed("hand request without facing".into());
            return text(e.status(), e.to_string());
        }
        let seconds = params.clock().duration_s();
        if seconds > self.max_clip_s {
            let e = WireError::TooLarge {
                seconds,
                limit: self.max_clip_s,
            };
            return text(e.status(), e.to_string());
        }
        match stub_response(stream, &params) {
            Ok(bytes) => (200, ARCHIVE_CONTENT_TYPE.to_string(), bytes),
            Err(e) => text(500, e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{validate, MotionArchive};

    fn params(facing: Option<FacingMode>) -> EstimateParams {
        EstimateParams {
            fps: 24.0,
            frame_count: 240,
            facing,
        }
    }

    #[test]
    fn request_round_trip() {
        let video = b"\x00\x00\x00\x18ftypisom--exo-\r\n--\r\n\x01\x02".to_vec();
        let p = params(Some(FacingMode::Back));
        let (ct, body) = encode_request(&p, &video);
        let (q, v) = decode_request(&ct, &body).unwrap();
        assert_eq!(q, p);
        assert_eq!(v, video);
        assert_eq!(encode_request(&p, &video), (ct, body));
    }

    #[test]
    fn malformed_requests_are_400() {
        let (ct, body) = encode_request(&params(None), b"abc");
        for (c, b) in [
            ("text/plain", body.as_slice()),
            ("multipart/form-data", body.as_slice()),
            (ct.as_str(), &body[..body.len() / 2]),
            (ct.as_str(), b"garbage".as_slice()),
        ] {
            assert_eq!(decode_request(c, b).unwrap_err().status(), 400);
        }
    }

    #[test]
    fn stub_service_contract() {
        let svc = StubService::default();
        let (status, _, body) = svc.handle("GET", HEALTH_PATH, "", b"");
        assert_eq!(status, 200);
        assert_eq!(Health::parse(std::str::from_utf8(&body).unwrap()).unwrap().mode, "STUB");

        let (ct, req) = encode_request(&params(None), b"video");
        let (status, _, body) = svc.handle("POST", BODY_PATH, &ct, &req);
        assert_eq!(status, 200);
        let a = MotionArchive::from_bytes(&body).unwrap();
        assert_eq!(a.clock.frame_count, 240);
        assert!(a.hands.is_none());

        let (status, _, _) = svc.handle("POST", HANDS_PATH, &ct, &req);
        assert_eq!(status, 400);

        let long = EstimateParams {
            fps: 24.0,
            frame_count: 24 * 61 + 1,
            facing: None,
        };
        let (ct, req) = encode_request(&long, b"video");
        assert_eq!(svc.handle("POST", BODY_PATH, &ct, &req).0, 413);
        assert_eq!(svc.handle("POST", "/nope", &ct, &req).0, 404);
    }

    #[test]
    fn stub_is_deterministic_and_clean() {
        for (fps, n) in [(24.0, 240), (30.0, 300), (24.0, 1)] {
            let p = EstimateParams {
                fps,
                frame_count: n,
                facing: Some(FacingMode::Front),
            };
            let a = stub_response(Stream::Body, &p).unwrap();
            assert_eq!(a, stub_response(Stream::Body, &p).unwrap());
            let h = stub_response(Stream::Hands, &p).unwrap();
            let body = MotionArchive::from_bytes(&a).unwrap().body.unwrap();
            let hands = MotionArchive::from_bytes(&h).unwrap().hands.unwrap();
            assert_eq!(body.frame_count(), n);
            let states = crate::motion::InteractionStateSequence::new(body.clock, vec![[0, 0]; n]).unwrap();
            let m = crate::motion::synchronize(&body, &hands, &states).unwrap();
            assert!(validate(&m).is_empty());
        }
    }
}
