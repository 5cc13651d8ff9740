//! Client side of the oracle wire protocol, exercised against an in-process
//! mock server.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regionwise::oracle::{LinearPatchClassifier, LinearPatchSpec, RemoteClassifier, RetryPolicy};
use regionwise::{
    bottom_up_attack, top_down_attack, BottomUpConfig, Classifier, Error, Image, Objective,
    Oracle, TopDownConfig,
};
use serde::Deserialize;
use serde_json::json;

#[derive(Deserialize)]
struct WireImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

#[derive(Deserialize)]
struct WireBatch {
    images: Vec<WireImage>,
}

struct Mock {
    model: LinearPatchClassifier,
    /// Answer this many upcoming requests with 503.
    fail_next: AtomicU32,
    /// Answer every request with this status when non-zero.
    force_status: AtomicU32,
    requests: AtomicU64,
    images: AtomicU64,
}

impl Mock {
    fn gate(&self) -> Option<Response> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let forced = self.force_status.load(Ordering::SeqCst);
        if forced != 0 {
            let code = StatusCode::from_u16(forced as u16).unwrap();
            return Some((code, "forced").into_response());
        }
        let pending = self.fail_next.load(Ordering::SeqCst);
        if pending > 0 {
            self.fail_next.store(pending - 1, Ordering::SeqCst);
            return Some((StatusCode::SERVICE_UNAVAILABLE, "busy").into_response());
        }
        None
    }

    fn run(&self, img: WireImage) -> Result<Vec<f64>, (StatusCode, String)> {
        let spec = self.model.spec();
        if (img.width, img.height) != (spec.width, spec.height) {
            return Err((StatusCode::BAD_REQUEST, "dimension mismatch".into()));
        }
        let image = Image::new(img.width, img.height, img.pixels)
            .map_err(|e| (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        self.images.fetch_add(1, Ordering::SeqCst);
        Ok(self.model.classify(&image).unwrap().as_slice().to_vec())
    }
}

async fn meta(State(m): State<Arc<Mock>>) -> Response {
    if let Some(r) = m.gate() {
        return r;
    }
    let spec = m.model.spec();
    Json(json!({"num_classes": spec.biases.len(), "width": spec.width, "height": spec.height}))
        .into_response()
}

async fn classify(State(m): State<Arc<Mock>>, Json(img): Json<WireImage>) -> Response {
    if let Some(r) = m.gate() {
        return r;
    }
    match m.run(img) {
        Ok(p) => Json(json!({ "probs": p })).into_response(),
        Err(r) => r.into_response(),
    }
}

async fn classify_batch(State(m): State<Arc<Mock>>, Json(batch): Json<WireBatch>) -> Response {
    if let Some(r) = m.gate() {
        return r;
    }
    let mut out = Vec::new();
    for img in batch.images {
        match m.run(img) {
            Ok(p) => out.push(p),
            Err(r) => return r.into_response(),
        }
    }
    Json(json!({ "probs": out })).into_response()
}

fn random_spec(seed: u64, w: usize, h: usize, classes: usize) -> LinearPatchSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = LinearPatchSpec::zeros(w, h, classes);
    for c in 0..classes {
        for y in 0..h {
            for x in 0..w {
                spec.set_weight(c, x, y, rng.random_range(-0.3..0.3));
            }
        }
        spec.biases[c] = rng.random_range(-1.0..1.0);
    }
    spec
}

fn serve(spec: LinearPatchSpec) -> (String, Arc<Mock>) {
    let mock = Arc::new(Mock {
        model: LinearPatchClassifier::new(spec).unwrap(),
        fail_next: AtomicU32::new(0),
        force_status: AtomicU32::new(0),
        requests: AtomicU64::new(0),
        images: AtomicU64::new(0),
    });
    let app = Router::new()
        .route("/v1/meta", get(meta))
        .route("/v1/classify", post(classify))
        .route("/v1/classify_batch", post(classify_batch))
        .with_state(mock.clone());
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    (format!("http://{addr}"), mock)
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        max_retries: 3,
        initial_backoff: Duration::from_millis(2),
    }
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap()
}

#[test]
fn meta_and_single_classify_match_in_process() {
    let spec = random_spec(1, 8, 6, 4);
    let local = Oracle::new(LinearPatchClassifier::new(spec.clone()).unwrap());
    let (url, _mock) = serve(spec);
    let remote = Oracle::new(RemoteClassifier::connect(&url).unwrap());
    assert_eq!(remote.num_classes(), 4);
    assert_eq!(remote.input_dims(), (8, 6));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let img = random_image(&mut rng, 8, 6);
        let a = remote.classify(&img).unwrap();
        let b = local.classify(&img).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
    assert_eq!(remote.ledger().total(), 20);
}

#[test]
fn batch_is_one_request_and_counts_every_image() {
    let spec = random_spec(2, 5, 5, 3);
    let local = LinearPatchClassifier::new(spec.clone()).unwrap();
    let (url, mock) = serve(spec);
    let remote = Oracle::new(RemoteClassifier::connect(&url).unwrap());
    let before = mock.requests.load(Ordering::SeqCst);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let images: Vec<Image> = (0..6).map(|_| random_image(&mut rng, 5, 5)).collect();
    let out = remote.classify_batch(&images).unwrap();
    assert_eq!(out.len(), 6);
    for (img, p) in images.iter().zip(&out) {
        let q = local.classify(img).unwrap();
        for (x, y) in p.as_slice().iter().zip(q.as_slice()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
    assert_eq!(remote.ledger().total(), 6);
    assert_eq!(mock.requests.load(Ordering::SeqCst) - before, 1);
}

#[test]
fn transient_failures_are_retried_and_charged_once() {
    let (url, mock) = serve(random_spec(3, 4, 4, 2));
    let remote = Oracle::new(RemoteClassifier::connect_with(&url, fast_retry()).unwrap());
    let img = Image::new(4, 4, vec![0.5; 48]).unwrap();

    mock.fail_next.store(2, Ordering::SeqCst);
    let before = mock.requests.load(Ordering::SeqCst);
    remote.classify(&img).unwrap();
    assert_eq!(mock.requests.load(Ordering::SeqCst) - before, 3);
    assert_eq!(remote.ledger().total(), 1);

    mock.fail_next.store(10, Ordering::SeqCst);
    let err = remote.classify(&img).unwrap_err();
    assert!(matches!(err, Error::Transport { attempts: 4, .. }), "{err}");
    assert!(err.is_oracle_failure());
    assert_eq!(remote.ledger().total(), 1);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, mock) = serve(random_spec(4, 4, 4, 2));
    let client = RemoteClassifier::connect_with(&url, fast_retry()).unwrap();

    // Bypass the oracle's own dimension check to reach the server's.
    let before = mock.requests.load(Ordering::SeqCst);
    let wrong = Image::new(3, 4, vec![0.5; 36]).unwrap();
    let err = client.classify(&wrong).unwrap_err();
    assert!(matches!(err, Error::Rejected { status: 400, .. }), "{err}");
    assert_eq!(mock.requests.load(Ordering::SeqCst) - before, 1);

    mock.force_status.store(422, Ordering::SeqCst);
    let img = Image::new(4, 4, vec![0.5; 48]).unwrap();
    let err = client.classify(&img).unwrap_err();
    assert!(matches!(err, Error::Rejected { status: 422, .. }), "{err}");
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = RemoteClassifier::connect_with(&format!("http://{addr}"), fast_retry()).unwrap_err();
    assert!(matches!(err, Error::Transport { attempts: 4, .. }), "{err}");
}

#[test]
fn remote_attacks_replay_in_process_attacks() {
    let spec = random_spec(5, 12, 12, 3);
    let (url, _mock) = serve(spec.clone());
    let local = Oracle::new(LinearPatchClassifier::new(spec).unwrap());
    let remote = Oracle::new(RemoteClassifier::connect(&url).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base = random_image(&mut rng, 12, 12);
    let ensemble = vec![base.clone(), base];
    let td = TopDownConfig {
        colors: regionwise::default_colors(3).unwrap(),
        max_area_fraction: 0.05,
        ..TopDownConfig::default()
    };
    let a = top_down_attack(&local, &ensemble, Objective::Untargeted(0), &td).unwrap();
    let b = top_down_attack(&remote, &ensemble, Objective::Untargeted(0), &td).unwrap();
    assert_eq!(a.queries, b.queries);
    assert_eq!(a.success, b.success);
    for (x, y) in a.trace.iter().zip(&b.trace) {
        let sx: Vec<usize> = x.iterations.iter().map(|i| i.selected).collect();
        let sy: Vec<usize> = y.iterations.iter().map(|i| i.selected).collect();
        assert_eq!(sx, sy);
        assert_eq!(x.final_region, y.final_region);
    }

    let bu = BottomUpConfig {
        max_area_fraction: 0.2,
        ..BottomUpConfig::default()
    };
    let a = bottom_up_attack(&local, &ensemble, Objective::Targeted(2), &bu).unwrap();
    let b = bottom_up_attack(&remote, &ensemble, Objective::Targeted(2), &bu).unwrap();
    assert_eq!(a.queries, b.queries);
    assert_eq!(a.trace[0].final_region, b.trace[0].final_region);
}
