//! Plain-text model files.
//!
//! ```text
//! airgap-ae-model 1
//! system comm
//! messages 256
//! ...
//! network transmitter
//! dims 256 256 8
//! activations elu linear
//! scale none
//! params 68104
//! -1.2e-2
//! ...
//! end
//! ```
//!
//! Parameters are written one per line in the shortest decimal form that
//! reads back to the same `f64`, so a save/load round trip is exact.
//! Optimizer state is not stored.

use std::fmt::Write as _;
use std::path::Path;

use crate::comm::{CommConfig, CommSystem, ReceiverKind};
use crate::feedback::{Device, DeviceId, FeedbackConfig, FeedbackSystem, RealTransmitter};
use crate::nn::{Activation, Learner, MlpNetwork, OptimizerKind};
use crate::receiver::Receiver;
use crate::{Error, Result};

pub const FORMAT_HEADER: &str = "airgap-ae-model 1";

fn receiver_kind_str(kind: ReceiverKind) -> &'static str {
    match kind {
        ReceiverKind::Plain => "plain",
        ReceiverKind::Rtn => "rtn",
    }
}

fn write_network(out: &mut String, name: &str, net: &MlpNetwork, scale: Option<f64>) {
    let dims: Vec<String> = net.dims().iter().map(usize::to_string).collect();
    let acts: Vec<String> = net.activations().iter().map(Activation::to_string).collect();
    let _ = writeln!(out, "network {name}");
    let _ = writeln!(out, "dims {}", dims.join(" "));
    let _ = writeln!(out, "activations {}", acts.join(" "));
    match scale {
        Some(s) => {
            let _ = writeln!(out, "scale {s:e}");
        }
        None => out.push_str("scale none\n"),
    }
    let _ = writeln!(out, "params {}", net.params().len());
    for p in net.params() {
        let _ = writeln!(out, "{p:e}");
    }
}

fn write_receiver(out: &mut String, prefix: &str, rx: &Receiver) {
    write_network(out, &format!("{prefix}classifier"), &rx.classifier().net, None);
    if let Some(est) = rx.estimator() {
        write_network(out, &format!("{prefix}estimator"), &est.net, None);
    }
}

/// Serializes a message autoencoder.
pub fn save_comm(sys: &CommSystem) -> String {
    let c = sys.config();
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_HEADER}");
    out.push_str("system comm\n");
    let _ = writeln!(out, "messages {}", c.messages);
    let _ = writeln!(out, "channel_uses {}", c.channel_uses);
    let _ = writeln!(out, "exploration_var {:e}", c.exploration_var);
    let _ = writeln!(out, "receiver {}", receiver_kind_str(c.receiver));
    let _ = writeln!(out, "optimizer {}", c.optimizer);
    let _ = writeln!(out, "learning_rate {:e}", c.learning_rate);
    write_network(&mut out, "transmitter", &sys.transmitter().net, None);
    write_receiver(&mut out, "", sys.receiver());
    out.push_str("end\n");
    out
}

/// Serializes both devices of a feedback system.
pub fn save_feedback(sys: &FeedbackSystem) -> String {
    let c = sys.config();
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_HEADER}");
    out.push_str("system feedback\n");
    let _ = writeln!(out, "channel_uses {}", c.channel_uses);
    let _ = writeln!(out, "exploration_var {:e}", c.exploration_var);
    let _ = writeln!(out, "receiver {}", receiver_kind_str(c.receiver));
    let _ = writeln!(out, "optimizer {}", c.optimizer);
    let _ = writeln!(out, "learning_rate {:e}", c.learning_rate);
    let _ = writeln!(out, "scale_decay {:e}", c.scale_decay);
    for (id, p) in [(DeviceId::A, "a"), (DeviceId::B, "b")] {
        let d = sys.device(id);
        write_network(&mut out, &format!("{p}.transmitter"), &d.tx.learner.net, d.tx.running_scale());
        write_receiver(&mut out, &format!("{p}."), &d.rx);
    }
    out.push_str("end\n");
    out
}

struct Reader<'a> {
    path: &'a Path,
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

struct NetworkSection {
    name: String,
    net: MlpNetwork,
    scale: Option<f64>,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str, path: &'a Path) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self { path, lines, pos: 0 }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let last = self.lines.last().map_or(1, |l| l.0);
        let item = *self
            .lines
            .get(self.pos)
            .ok_or_else(|| self.err(last, "unexpected end of file"))?;
        self.pos += 1;
        Ok(item)
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|l| l.1)
    }

    /// Reads `key value` and returns the value.
    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.trim())),
            _ if line == key => Ok((n, "")),
            _ => Err(self.err(n, format!("expected `{key}`, found `{line}`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, v) = self.field(key)?;
        v.parse().map_err(|_| self.err(n, format!("invalid {key} `{v}`")))
    }

    fn network(&mut self) -> Result<NetworkSection> {
        let (_, name) = self.field("network")?;
        let (n, dims) = self.field("dims")?;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err(n, "invalid layer dimensions"))?;
        let (n, acts) = self.field("activations")?;
        let acts: Vec<Activation> = acts
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_>>()
            .map_err(|e| self.err(n, e.to_string()))?;
        let (n, scale) = self.field("scale")?;
        let scale = match scale {
            "none" => None,
            s => Some(s.parse::<f64>().map_err(|_| self.err(n, format!("invalid scale `{s}`")))?),
        };
        let (n_count, count) = self.field("params")?;
        let count: usize = count.parse().map_err(|_| self.err(n_count, "invalid parameter count"))?;
        if dims.len() < 2 || count != MlpNetwork::param_count(&dims) {
            return Err(self.err(n_count, format!("{count} parameters do not fit layer dims {dims:?}")));
        }
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, v) = self.next()?;
            let p: f64 = v.parse().map_err(|_| self.err(n, format!("invalid parameter `{v}`")))?;
            if !p.is_finite() {
                return Err(self.err(n, "non-finite parameter"));
            }
            params.push(p);
        }
        let net = MlpNetwork::with_params(&dims, &acts, params).map_err(|e| self.err(n_count, e.to_string()))?;
        Ok(NetworkSection {
            name: name.to_string(),
            net,
            scale,
        })
    }

    fn named_network(&mut self, name: &str) -> Result<NetworkSection> {
        let line = self.lines.get(self.pos).map_or(0, |l| l.0);
        let s = self.network()?;
        if s.name != name {
            return Err(self.err(line, format!("expected network `{name}`, found `{}`", s.name)));
        }
        Ok(s)
    }

    fn header(&mut self, system: &str) -> Result<()> {
        let (n, h) = self.next()?;
        if h != FORMAT_HEADER {
            return Err(self.err(n, format!("not a model file (expected `{FORMAT_HEADER}`)")));
        }
        let (n, s) = self.field("system")?;
        if s != system {
            return Err(self.err(n, format!("expected a {system} model, found `{s}`")));
        }
        Ok(())
    }

    fn receiver_kind(&mut self) -> Result<ReceiverKind> {
        let (n, v) = self.field("receiver")?;
        match v {
            "plain" => Ok(ReceiverKind::Plain),
            "rtn" => Ok(ReceiverKind::Rtn),
            _ => Err(self.err(n, format!("unknown receiver `{v}`"))),
        }
    }

    fn optimizer(&mut self) -> Result<OptimizerKind> {
        let (n, v) = self.field("optimizer")?;
        v.parse().map_err(|e: Error| self.err(n, e.to_string()))
    }

    fn finish(&mut self) -> Result<()> {
        let (n, l) = self.next()?;
        if l != "end" {
            return Err(self.err(n, format!("expected `end`, found `{l}`")));
        }
        if let Some(&(n, _)) = self.lines.get(self.pos) {
            return Err(self.err(n, "trailing content after `end`"));
        }
        Ok(())
    }
}

/// Parses a message autoencoder saved by [`save_comm`]; `path` is used in
/// error messages.
pub fn load_comm(text: &str, path: &Path) -> Result<CommSystem> {
    let mut r = Reader::new(text, path);
    r.header("comm")?;
    let config = CommConfig {
        messages: r.parse("messages")?,
        channel_uses: r.parse("channel_uses")?,
        exploration_var: r.parse("exploration_var")?,
        receiver: r.receiver_kind()?,
        optimizer: r.optimizer()?,
        learning_rate: r.parse("learning_rate")?,
    };
    let tx = r.named_network("transmitter")?.net;
    let cls = r.named_network("classifier")?.net;
    let est = match config.receiver {
        ReceiverKind::Rtn => Some(r.named_network("estimator")?.net),
        ReceiverKind::Plain => None,
    };
    r.finish()?;
    CommSystem::from_networks(config, tx, cls, est)
}

/// Parses a feedback system saved by [`save_feedback`].
pub fn load_feedback(text: &str, path: &Path) -> Result<FeedbackSystem> {
    let mut r = Reader::new(text, path);
    r.header("feedback")?;
    let config = FeedbackConfig {
        channel_uses: r.parse("channel_uses")?,
        exploration_var: r.parse("exploration_var")?,
        receiver: r.receiver_kind()?,
        optimizer: r.optimizer()?,
        learning_rate: r.parse("learning_rate")?,
        scale_decay: r.parse("scale_decay")?,
    };
    config.validate()?;
    let learner = |net| Learner::new(net, config.optimizer, config.learning_rate);
    let mut devices = Vec::new();
    for p in ["a", "b"] {
        let t = r.named_network(&format!("{p}.transmitter"))?;
        let tx = RealTransmitter::from_network(&config, t.net, t.scale)?;
        let cls = learner(r.named_network(&format!("{p}.classifier"))?.net);
        let rx = match config.receiver {
            ReceiverKind::Plain => Receiver::Plain(cls),
            ReceiverKind::Rtn => Receiver::rtn(learner(r.named_network(&format!("{p}.estimator"))?.net), cls)?,
        };
        devices.push(Device { tx, rx });
    }
    if r.peek().is_some_and(|l| l.starts_with("network")) {
        let line = r.lines[r.pos].0;
        return Err(r.err(line, "unexpected extra network"));
    }
    r.finish()?;
    let b = devices.pop().expect("two devices");
    let a = devices.pop().expect("two devices");
    FeedbackSystem::from_devices(config, a, b)
}

pub fn write_model(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn comm_round_trip_is_exact() {
        for cfg in [CommConfig { messages: 16, ..CommConfig::awgn() }, CommConfig { messages: 8, ..CommConfig::rbf() }] {
            let sys = CommSystem::new(cfg, &mut SeedTree::new(4).stream("init")).unwrap();
            let text = save_comm(&sys);
            let back = load_comm(&text, Path::new("m.txt")).unwrap();
            assert_eq!(back.transmitter().net, sys.transmitter().net);
            assert_eq!(back.receiver().classifier().net, sys.receiver().classifier().net);
            assert_eq!(back.config(), sys.config());
            assert_eq!(save_comm(&back), text);
        }
    }

    #[test]
    fn feedback_round_trip_keeps_scale() {
        for cfg in [FeedbackConfig::awgn(), FeedbackConfig::rbf()] {
            let sys = FeedbackSystem::new(cfg, &mut SeedTree::new(5).stream("init")).unwrap();
            let text = save_feedback(&sys);
            let back = load_feedback(&text, Path::new("f.txt")).unwrap();
            assert_eq!(
                back.device(DeviceId::B).tx.running_scale(),
                sys.device(DeviceId::B).tx.running_scale()
            );
            assert_eq!(save_feedback(&back), text);
        }
    }

    #[test]
    fn corrupt_files_report_lines() {
        let sys = CommSystem::new(CommConfig { messages: 4, channel_uses: 1, ..CommConfig::awgn() }, &mut SeedTree::new(1).stream("i")).unwrap();
        let text = save_comm(&sys);
        let mut lines: Vec<&str> = text.lines().collect();
        lines[14] = "zebra";
        let bad = lines.join("\n");
        let e = load_comm(&bad, Path::new("m")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 15, .. }), "{e}");
        let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(load_comm(&truncated, Path::new("m")).is_err());
        assert!(load_feedback(&text, Path::new("m")).is_err());
    }
}
