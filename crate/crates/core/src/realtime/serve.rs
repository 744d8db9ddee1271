//! The serving loop: replayed events in, prediction bundles out.
//!
//! Bundles flow to pluggable sinks — an in-memory collector, a JSON-lines
//! writer, a bounded queue that drops its oldest entries under backpressure,
//! and a shared snapshot served over a minimal HTTP endpoint. Warmup and
//! staleness conditions are counted per tick and never stop the loop;
//! configuration errors do.

use std::collections::{BTreeMap, VecDeque};
use std::fs::File;
use std::io::{BufWriter, Read as _, Write as _};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{predict_now, service_horizons, FeedEvent, FeedState, PredictionBundle, ServingModel, TICK_INTERVAL_MIN};
use crate::datamodel::GarageId;
use crate::error::{Error, Result};

/// Receives emitted bundles.
pub trait Sink {
    fn emit(&mut self, bundle: &PredictionBundle) -> Result<()>;
}

/// Collects every bundle in memory.
#[derive(Default)]
pub struct MemorySink {
    pub bundles: Vec<PredictionBundle>,
}

impl Sink for MemorySink {
    fn emit(&mut self, bundle: &PredictionBundle) -> Result<()> {
        self.bundles.push(bundle.clone());
        Ok(())
    }
}

/// Appends one JSON line per bundle.
pub struct JsonlSink {
    writer: BufWriter<File>,
}

impl JsonlSink {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        Ok(Self {
            writer: BufWriter::new(File::create(path)?),
        })
    }
}

impl Sink for JsonlSink {
    fn emit(&mut self, bundle: &PredictionBundle) -> Result<()> {
        writeln!(self.writer, "{}", bundle.to_json())?;
        self.writer.flush()?;
        Ok(())
    }
}

/// Keeps the newest `capacity` bundles; a slow consumer loses the oldest
/// ones, and the losses are counted.
pub struct BoundedQueueSink {
    capacity: usize,
    pub queue: VecDeque<PredictionBundle>,
    pub dropped: usize,
}

impl BoundedQueueSink {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            queue: VecDeque::new(),
            dropped: 0,
        }
    }
}

impl Sink for BoundedQueueSink {
    fn emit(&mut self, bundle: &PredictionBundle) -> Result<()> {
        if self.queue.len() == self.capacity {
            self.queue.pop_front();
            self.dropped += 1;
        }
        self.queue.push_back(bundle.clone());
        Ok(())
    }
}

/// Forwards each bundle to every inner sink in order.
pub struct FanoutSink<'a> {
    pub sinks: Vec<&'a mut dyn Sink>,
}

impl Sink for FanoutSink<'_> {
    fn emit(&mut self, bundle: &PredictionBundle) -> Result<()> {
        for sink in &mut self.sinks {
            sink.emit(bundle)?;
        }
        Ok(())
    }
}

/// Replay pacing: as fast as possible, or scaled toward wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplaySpeed {
    /// No sleeping between ticks.
    Instant,
    /// Simulated minutes pass `factor` times faster than wall-clock ones.
    Factor(f64),
}

impl ReplaySpeed {
    fn pause(&self, tick_interval_min: i64) {
        if let ReplaySpeed::Factor(factor) = *self {
            let seconds = tick_interval_min as f64 * 60.0 / factor;
            std::thread::sleep(Duration::from_secs_f64(seconds));
        }
    }
}

/// Serving-loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServeConfig {
    /// Minutes between prediction ticks.
    pub tick_interval_min: i64,
    /// Horizons each bundle promises, minutes from the tick.
    pub horizons: Vec<u32>,
    pub speed: ReplaySpeed,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            tick_interval_min: TICK_INTERVAL_MIN,
            horizons: service_horizons(),
            speed: ReplaySpeed::Instant,
        }
    }
}

impl ServeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tick_interval_min < 1 {
            return Err(Error::InvalidConfig(format!(
                "tick interval must be at least one minute, got {}",
                self.tick_interval_min
            )));
        }
        if self.horizons.is_empty() {
            return Err(Error::InvalidConfig("no serving horizons".into()));
        }
        if !self.horizons.windows(2).all(|w| w[0] < w[1]) || self.horizons[0] == 0 {
            return Err(Error::InvalidConfig(
                "serving horizons must be positive and strictly ascending".into(),
            ));
        }
        if let ReplaySpeed::Factor(f) = self.speed {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "speed factor must be positive and finite, got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome counts of a replay run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServeSummary {
    /// Prediction ticks attempted.
    pub ticks: usize,
    /// Bundles emitted (one per model on each successful tick).
    pub emitted: usize,
    /// Ticks skipped because some stream had not warmed up yet.
    pub skipped_incomplete: usize,
    /// Ticks skipped because the occupancy feed was older than the budget.
    pub skipped_stale: usize,
}

/// Drives the feed state through `events` and emits one bundle per model
/// on every tick where the state is warm and fresh enough.
///
/// Warmup ([`Error::IncompleteState`]) and staleness ([`Error::StaleFeed`])
/// are per-tick conditions: counted, logged, and skipped. Anything else —
/// a schema mismatch, a failing sink — aborts the run.
pub fn serve_replay(
    events: &[FeedEvent],
    state: &mut FeedState,
    models: &[ServingModel],
    garage: &GarageId,
    config: &ServeConfig,
    sink: &mut dyn Sink,
) -> Result<ServeSummary> {
    config.validate()?;
    if models.is_empty() {
        return Err(Error::EmptyInput("no models to serve"));
    }
    if events.is_empty() {
        return Err(Error::EmptyInput("no feed events"));
    }
    debug_assert!(
        events.windows(2).all(|w| w[0].time.0 <= w[1].time.0),
        "events must be time-ordered"
    );
    let tick = config.tick_interval_min;
    let first_tick = super::ceil_div(events[0].time.0, tick) * tick;
    let last_tick = events[events.len() - 1].time.0.div_euclid(tick) * tick;
    let mut summary = ServeSummary {
        ticks: 0,
        emitted: 0,
        skipped_incomplete: 0,
        skipped_stale: 0,
    };
    let mut cursor = 0usize;
    let mut now = first_tick;
    while now <= last_tick {
        while cursor < events.len() && events[cursor].time.0 <= now {
            state.ingest(&events[cursor])?;
            cursor += 1;
        }
        summary.ticks += 1;
        let clock = crate::datamodel::Timestamp(now);
        let mut tick_failed = false;
        for model in models {
            match predict_now(state, model, garage, clock, &config.horizons) {
                Ok(bundle) => {
                    sink.emit(&bundle)?;
                    summary.emitted += 1;
                }
                Err(Error::IncompleteState(what)) => {
                    log::debug!("tick {clock}: state incomplete ({what})");
                    summary.skipped_incomplete += 1;
                    tick_failed = true;
                }
                Err(Error::StaleFeed { staleness_min, .. }) => {
                    log::warn!("tick {clock}: feed stale by {staleness_min} min");
                    summary.skipped_stale += 1;
                    tick_failed = true;
                }
                Err(other) => return Err(other),
            }
            if tick_failed {
                // The condition is state-level: every model would fail the
                // same way, so count the tick once and move on.
                break;
            }
        }
        config.speed.pause(tick);
        now += tick;
    }
    Ok(summary)
}

/// Snapshot shared between the serving loop and HTTP readers: the latest
/// bundle per target, the staleness it reported, and emission counts.
#[derive(Clone)]
pub struct ServeStatus {
    inner: Arc<StatusInner>,
}

struct StatusInner {
    bundles: Mutex<BTreeMap<String, String>>,
    staleness_min: AtomicI64,
    emitted: AtomicU64,
    started: Instant,
}

impl Default for ServeStatus {
    fn default() -> Self {
        Self::new()
    }
}

impl ServeStatus {
    pub fn new() -> Self {
        Self {
            inner: Arc::new(StatusInner {
                bundles: Mutex::new(BTreeMap::new()),
                staleness_min: AtomicI64::new(-1),
                emitted: AtomicU64::new(0),
                started: Instant::now(),
            }),
        }
    }

    pub fn publish(&self, bundle: &PredictionBundle) {
        let mut bundles = self.inner.bundles.lock().expect("status lock");
        bundles.insert(bundle.target.as_str().to_string(), bundle.to_json());
        self.inner
            .staleness_min
            .store(bundle.staleness_min, Ordering::Relaxed);
        self.inner.emitted.fetch_add(1, Ordering::Relaxed);
    }

    /// JSON object of latest bundles keyed by target, or `None` before the
    /// first emission.
    pub fn predictions_json(&self) -> Option<String> {
        let bundles = self.inner.bundles.lock().expect("status lock");
        if bundles.is_empty() {
            return None;
        }
        let body: Vec<String> = bundles
            .iter()
            .map(|(target, json)| format!("\"{target}\":{json}"))
            .collect();
        Some(format!("{{{}}}", body.join(",")))
    }

    pub fn health_json(&self) -> String {
        let staleness = self.inner.staleness_min.load(Ordering::Relaxed);
        let staleness = if staleness < 0 {
            "null".to_string()
        } else {
            staleness.to_string()
        };
        format!(
            "{{\"status\":\"ok\",\"uptime_s\":{},\"staleness_min\":{},\"emitted\":{}}}",
            self.inner.started.elapsed().as_secs(),
            staleness,
            self.inner.emitted.load(Ordering::Relaxed),
        )
    }
}

impl Sink for ServeStatus {
    fn emit(&mut self, bundle: &PredictionBundle) -> Result<()> {
        self.publish(bundle);
        Ok(())
    }
}

/// Minimal single-threaded HTTP endpoint over a [`ServeStatus`]:
/// `GET /predictions` returns the latest bundles (503 before the first),
/// `GET /health` returns status, anything else 404.
pub struct HttpServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl HttpServer {
    /// Binds and starts serving on a background thread. Use port 0 to let
    /// the OS pick one; the chosen address is [`HttpServer::addr`].
    pub fn start(bind: &str, status: ServeStatus) -> Result<Self> {
        let listener = TcpListener::bind(bind)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                match stream {
                    Ok(stream) => {
                        if let Err(err) = handle_connection(stream, &status) {
                            log::warn!("http connection failed: {err}");
                        }
                    }
                    Err(err) => log::warn!("http accept failed: {err}"),
                }
            }
        });
        Ok(Self {
            addr,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops the accept loop and joins the thread.
    pub fn stop(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        if let Some(handle) = self.handle.take() {
            self.shutdown.store(true, Ordering::SeqCst);
            // Wake the blocking accept with a throwaway connection.
            let _ = TcpStream::connect(self.addr);
            let _ = handle.join();
        }
    }
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

fn handle_connection(mut stream: TcpStream, status: &ServeStatus) -> Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(2)))?;
    let mut buf = [0u8; 4096];
    let mut len = 0usize;
    // Read until the end of the request head; the routes take no bodies.
    while len < buf.len() {
        let n = stream.read(&mut buf[len..])?;
        if n == 0 {
            break;
        }
        len += n;
        if buf[..len].windows(4).any(|w| w == b"\r\n\r\n") {
            break;
        }
    }
    let head = String::from_utf8_lossy(&buf[..len]);
    let mut parts = head.lines().next().unwrap_or("").split_whitespace();
    let method = parts.next().unwrap_or("");
    let path = parts.next().unwrap_or("");
    let (code, reason, body) = match (method, path) {
        ("GET", "/predictions") => match status.predictions_json() {
            Some(body) => (200, "OK", body),
            None => (503, "Service Unavailable", "{\"error\":\"no bundle emitted yet\"}".into()),
        },
        ("GET", "/health") => (200, "OK", status.health_json()),
        _ => (404, "Not Found", "{\"error\":\"unknown route\"}".into()),
    };
    write!(
        stream,
        "HTTP/1.1 {code} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len(),
    )?;
    stream.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{LocationId, Timestamp};
    use crate::features::{FeatureSchema, HorizonGrid, Matrix, TargetKind};
    use crate::models::forest::{self, ForestConfig};
    use crate::models::{ModelParams, TrainedModel};
    use crate::realtime::{FeedPayload, sort_events};
    use std::collections::BTreeMap as Map;

    fn tiny_schema() -> FeatureSchema {
        use crate::features::{FeatureCategory, FeatureDef};
        use crate::signal::{FLOW_LAG_COUNT, OCCUPANCY_LAG_COUNT};
        let mut features = Vec::new();
        for name in ["tod_sin", "tod_cos", "holiday"] {
            features.push(FeatureDef {
                name: name.into(),
                category: FeatureCategory::Time,
                scaling: None,
            });
        }
        for d in 0..7 {
            features.push(FeatureDef {
                name: format!("weekday_{d}"),
                category: FeatureCategory::Calendar,
                scaling: None,
            });
        }
        features.push(FeatureDef {
            name: "temperature".into(),
            category: FeatureCategory::Weather,
            scaling: Some((0.0, 200.0)),
        });
        features.push(FeatureDef {
            name: "rain".into(),
            category: FeatureCategory::Weather,
            scaling: None,
        });
        for lag in 0..FLOW_LAG_COUNT {
            features.push(FeatureDef {
                name: format!("flow_loop-a_lag{lag}"),
                category: FeatureCategory::TrafficFlow,
                scaling: None,
            });
        }
        for lag in 0..OCCUPANCY_LAG_COUNT {
            features.push(FeatureDef {
                name: format!("occupancy_lag_{lag}"),
                category: FeatureCategory::OccupancyLookback,
                scaling: None,
            });
        }
        FeatureSchema {
            features,
            locations: vec![LocationId::from("loop-a")],
            occupancy_cadence_min: 11,
            filter_cutoff: 0.05,
            filter_order: 2,
            flow_window_min: 10,
        }
    }

    /// Traffic every minute, weather every 10, occupancy every 11, over
    /// `minutes` minutes, with an optional occupancy blackout.
    fn toy_events(minutes: i64, occupancy_blackout: Option<(i64, i64)>) -> Vec<FeedEvent> {
        let mut events = Vec::new();
        for m in 0..minutes {
            events.push(FeedEvent {
                time: Timestamp(m),
                payload: FeedPayload::Traffic {
                    location: LocationId::from("loop-a"),
                    flow: 60.0 + (m % 7) as f64,
                },
            });
            if m % 10 == 0 {
                events.push(FeedEvent {
                    time: Timestamp(m),
                    payload: FeedPayload::Weather {
                        temperature_tenth_c: 100.0,
                        rain: false,
                    },
                });
            }
            if m % 11 == 0 {
                let blacked_out = occupancy_blackout
                    .is_some_and(|(lo, hi)| (lo..=hi).contains(&m));
                if !blacked_out {
                    events.push(FeedEvent {
                        time: Timestamp(m),
                        payload: FeedPayload::Occupancy {
                            rate: 0.3 + 0.001 * m as f64,
                        },
                    });
                }
            }
        }
        sort_events(&mut events);
        events
    }

    fn toy_model(schema: &FeatureSchema, target: TargetKind) -> ServingModel {
        let width = schema.width();
        let x = Matrix::from_rows(
            (0..40)
                .map(|i| (0..width).map(|j| ((i * 3 + j) % 11) as f64).collect())
                .collect(),
        );
        let y = Matrix::from_rows(
            (0..40)
                .map(|i| (0..18).map(|h| 0.4 + 0.002 * ((i + h) as f64)).collect())
                .collect(),
        );
        let params = forest::train(
            &x,
            &y,
            &ForestConfig {
                n_trees: 2,
                max_depth: 3,
                ..Default::default()
            },
        )
        .unwrap();
        ServingModel::new(TrainedModel {
            target,
            horizons: HorizonGrid::default(),
            schema_digest: schema.digest(),
            config_digest: "c".into(),
            params: ModelParams::Forest(params),
        })
        .unwrap()
    }

    #[test]
    fn warm_loop_emits_one_bundle_per_model_per_tick() {
        let schema = tiny_schema();
        let mut state = FeedState::new(&schema, &Map::new()).unwrap();
        let events = toy_events(180, None);
        let models = [
            toy_model(&schema, TargetKind::Occupancy),
            toy_model(&schema, TargetKind::Influx),
        ];
        let garage = GarageId::from("g1");
        let mut sink = MemorySink::default();
        let summary = serve_replay(
            &events,
            &mut state,
            &models,
            &garage,
            &ServeConfig::default(),
            &mut sink,
        )
        .unwrap();
        // Ticks at 0, 5, ..., 175; anchors exist from minute 44 on, so the
        // first nine ticks find an incomplete state.
        assert_eq!(summary.ticks, 36);
        assert_eq!(summary.skipped_incomplete, 9);
        assert_eq!(summary.skipped_stale, 0);
        assert_eq!(summary.emitted, (36 - 9) * 2);
        assert_eq!(sink.bundles.len(), summary.emitted);
        let occupancy = sink
            .bundles
            .iter()
            .filter(|b| b.target == TargetKind::Occupancy)
            .count();
        assert_eq!(occupancy, 27, "half the bundles per target");
        assert!(sink
            .bundles
            .iter()
            .all(|b| b.predictions.len() == 12 && b.predictions[0].0 == 5));
    }

    #[test]
    fn occupancy_blackout_reports_stale_then_recovers() {
        let schema = tiny_schema();
        let mut state = FeedState::new(&schema, &Map::new()).unwrap();
        // Occupancy silent in minutes 56..=109: last anchor before the gap
        // is 55, the next is 110.
        let events = toy_events(180, Some((56, 109)));
        let models = [toy_model(&schema, TargetKind::Occupancy)];
        let garage = GarageId::from("g1");
        let mut sink = MemorySink::default();
        let summary = serve_replay(
            &events,
            &mut state,
            &models,
            &garage,
            &ServeConfig::default(),
            &mut sink,
        )
        .unwrap();
        // Ticks 90, 95, 100, 105 see staleness 35..50 over the budget.
        assert_eq!(summary.skipped_stale, 4);
        // Bundles resume at tick 110 with a fresh anchor.
        assert!(sink
            .bundles
            .iter()
            .any(|b| b.issued == Timestamp(110) && b.staleness_min == 0));
        // During the tolerated part of the gap staleness grows to 30.
        assert!(sink
            .bundles
            .iter()
            .any(|b| b.issued == Timestamp(85) && b.staleness_min == 30));
    }

    #[test]
    fn pacing_does_not_change_the_bundles() {
        let schema = tiny_schema();
        let events = toy_events(120, None);
        let models = [toy_model(&schema, TargetKind::Occupancy)];
        let garage = GarageId::from("g1");
        let run = |speed: ReplaySpeed| {
            let mut state = FeedState::new(&schema, &Map::new()).unwrap();
            let mut sink = MemorySink::default();
            serve_replay(
                &events,
                &mut state,
                &models,
                &garage,
                &ServeConfig {
                    speed,
                    ..Default::default()
                },
                &mut sink,
            )
            .unwrap();
            sink.bundles
        };
        let instant = run(ReplaySpeed::Instant);
        let paced = run(ReplaySpeed::Factor(1e9));
        assert_eq!(instant, paced);
    }

    #[test]
    fn bounded_queue_drops_oldest_and_counts() {
        let mut sink = BoundedQueueSink::new(3);
        let mk = |i: i64| PredictionBundle {
            issued: Timestamp(i),
            garage: GarageId::from("g"),
            target: TargetKind::Occupancy,
            staleness_min: 0,
            predictions: vec![(5, 0.5)],
            model_digest: "d".into(),
        };
        for i in 0..7 {
            sink.emit(&mk(i)).unwrap();
        }
        assert_eq!(sink.dropped, 4);
        let kept: Vec<i64> = sink.queue.iter().map(|b| b.issued.0).collect();
        assert_eq!(kept, vec![4, 5, 6]);
    }

    #[test]
    fn jsonl_sink_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundles.jsonl");
        let mk = |i: i64| PredictionBundle {
            issued: Timestamp(i),
            garage: GarageId::from("g"),
            target: TargetKind::Influx,
            staleness_min: 2,
            predictions: vec![(5, 1.5), (10, 2.5)],
            model_digest: "d".into(),
        };
        {
            let mut sink = JsonlSink::create(&path).unwrap();
            sink.emit(&mk(100)).unwrap();
            sink.emit(&mk(105)).unwrap();
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let parsed = PredictionBundle::from_json(lines[1]).unwrap();
        assert_eq!(parsed, mk(105));
    }

    fn http_get(addr: SocketAddr, path: &str) -> (u16, String) {
        let mut stream = TcpStream::connect(addr).unwrap();
        write!(stream, "GET {path} HTTP/1.1\r\nHost: test\r\n\r\n").unwrap();
        let mut response = String::new();
        stream.read_to_string(&mut response).unwrap();
        let code: u16 = response
            .split_whitespace()
            .nth(1)
            .and_then(|s| s.parse().ok())
            .unwrap();
        let body = response
            .split("\r\n\r\n")
            .nth(1)
            .unwrap_or_default()
            .to_string();
        (code, body)
    }

    #[test]
    fn http_endpoint_serves_predictions_and_health() {
        let status = ServeStatus::new();
        let server = HttpServer::start("127.0.0.1:0", status.clone()).unwrap();
        let addr = server.addr();

        let (code, body) = http_get(addr, "/predictions");
        assert_eq!(code, 503, "{body}");
        let (code, body) = http_get(addr, "/health");
        assert_eq!(code, 200);
        assert!(body.contains("\"staleness_min\":null"), "{body}");

        status.publish(&PredictionBundle {
            issued: Timestamp(900),
            garage: GarageId::from("g"),
            target: TargetKind::Occupancy,
            staleness_min: 4,
            predictions: vec![(5, 0.71)],
            model_digest: "m".into(),
        });
        let (code, body) = http_get(addr, "/predictions");
        assert_eq!(code, 200);
        let parsed: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert_eq!(parsed["occupancy"]["staleness_min"], 4);
        let (code, body) = http_get(addr, "/health");
        assert_eq!(code, 200);
        assert!(body.contains("\"staleness_min\":4"), "{body}");
        assert!(body.contains("\"emitted\":1"), "{body}");

        let (code, _) = http_get(addr, "/nope");
        assert_eq!(code, 404);
        server.stop();
    }
}
