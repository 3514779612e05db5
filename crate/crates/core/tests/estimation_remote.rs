use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use exo_core::estimation::wire::StubService;
use exo_core::estimation::{
    estimate_body, estimate_hands, EstimationError, EstimatorDescriptor, OracleEstimator, RemoteEstimator,
    ScenarioScript, VideoClip,
};
use exo_core::gateway::media::stub_mp4;
use exo_core::gateway::ArtifactStore;
use exo_core::motion::{synchronize, validate, FacingMode, InteractionStateSequence};

fn serve_one(mut stream: TcpStream, svc: &StubService) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    let mut content_type = String::new();
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            match k.trim().to_ascii_lowercase().as_str() {
                "content-type" => content_type = v.trim().to_string(),
                "content-length" => length = v.trim().parse().unwrap(),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body).unwrap();
    let (status, ct, reply) = svc.handle(&method, &path, &content_type, &body);
    let head = format!(
        "HTTP/1.1 {status} X\r\nContent-Type: {ct}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        reply.len()
    );
    stream.write_all(head.as_bytes()).unwrap();
    stream.write_all(&reply).unwrap();
}

/// Spawns a loopback HTTP server backed by the reference stub.
fn spawn_stub(max_clip_s: f64) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let svc = StubService { max_clip_s };
    thread::spawn(move || {
        for conn in listener.incoming().flatten() {
            serve_one(conn, &svc);
        }
    });
    format!("http://{addr}")
}

fn clip(store: &ArtifactStore, fps: f64, frames: usize) -> VideoClip {
    let art = store.put_video(&stub_mp4(fps, frames, "remote"), fps, frames).unwrap();
    VideoClip::from_artifact(art, Some(FacingMode::Front)).unwrap()
}

#[test]
fn health_reports_stub_mode() {
    let remote = RemoteEstimator::new(&spawn_stub(60.0)).unwrap();
    let h = remote.health().unwrap();
    assert_eq!(h.mode, "STUB");
    assert_eq!(h.version, "1");
}

#[test]
fn remote_estimates_preserve_frame_counts() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let remote = RemoteEstimator::new(&spawn_stub(60.0)).unwrap();
    for (fps, n) in [(24.0, 240), (30.0, 300), (24.0, 1), (25.0, 37), (60.0, 601)] {
        let c = clip(&store, fps, n);
        let body = estimate_body(&c, &remote).unwrap();
        let hands = estimate_hands(&c, FacingMode::Back, &remote).unwrap();
        assert_eq!(body.frame_count(), n);
        assert_eq!(hands.columns.len(), n);
        assert_eq!(hands.facing, FacingMode::Back);
        let states = InteractionStateSequence::new(body.clock, vec![[0, 0]; n]).unwrap();
        assert!(validate(&synchronize(&body, &hands, &states).unwrap()).is_empty());
    }
}

#[test]
fn remote_body_matches_walk_oracle_to_f32() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let c = clip(&store, 24.0, 241);
    let remote = RemoteEstimator::new(&spawn_stub(60.0)).unwrap();
    let got = estimate_body(&c, &remote).unwrap();
    let want = estimate_body(&c, &OracleEstimator::new(ScenarioScript::walk_line())).unwrap();
    for (a, b) in got.root_positions.iter().zip(&want.root_positions) {
        for k in 0..3 {
            assert_eq!(a[k], b[k] as f32 as f64);
        }
    }
}

#[test]
fn oversize_clip_is_413() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let remote = RemoteEstimator::new(&spawn_stub(5.0)).unwrap();
    match estimate_body(&clip(&store, 24.0, 241), &remote) {
        Err(EstimationError::Remote { status, .. }) => assert_eq!(status, 413),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unreachable_service_is_transport_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = ArtifactStore::open(dir.path()).unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let d = EstimatorDescriptor::remote("body", &format!("http://127.0.0.1:{port}"));
    let backend = d.connect(&OracleEstimator::new(ScenarioScript::Stand)).unwrap();
    assert!(matches!(
        estimate_body(&clip(&store, 24.0, 24), backend.as_ref()),
        Err(EstimationError::Transport(_))
    ));
}
