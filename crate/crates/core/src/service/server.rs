use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::protocol::{Body, WireMessage, PROTOCOL_VERSION};
use crate::control::QuantileMap;
use crate::corpus::WordEvent;
use crate::engine::{EngineConfig, Session};
use crate::model::FilmClassifier;
use crate::Result;

/// Read-only state shared by every connection.
#[derive(Clone)]
pub struct ServiceContext {
    pub model: Arc<FilmClassifier>,
    pub quantile_map: Option<Arc<QuantileMap>>,
    pub engine: EngineConfig,
}

/// Drive one connection until the peer closes, sends `session_close`, or
/// violates the protocol.
///
/// Malformed lines get an `error` reply and the session continues. Session
/// traffic before `session_open` gets an `error` reply and ends the
/// connection.
pub fn handle_connection<R: BufRead, W: Write>(ctx: &ServiceContext, reader: R, writer: W) -> Result<()> {
    let mut out = BufWriter::new(writer);
    let mut send = |m: WireMessage| -> Result<()> {
        out.write_all(m.to_line().as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    };
    let mut session: Option<Session> = None;

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sid = session.as_ref().map_or(String::new(), |s| s.id.clone());
        let msg = match WireMessage::from_line(&line) {
            Ok(m) => m,
            Err(e) => {
                send(WireMessage::error(sid, format!("malformed message: {e}")))?;
                continue;
            }
        };
        if msg.v != PROTOCOL_VERSION {
            send(WireMessage::error(sid, format!("unsupported protocol version {}", msg.v)))?;
            continue;
        }

        let Some(s) = session.as_mut() else {
            match msg.body {
                Body::SessionOpen {} => {
                    log::debug!("session {} opened", msg.session_id);
                    session = Some(Session::new(
                        msg.session_id.clone(),
                        ctx.model.clone(),
                        ctx.quantile_map.clone(),
                        ctx.engine,
                    ));
                    send(WireMessage::new(msg.session_id, Body::SessionOpen {}))?;
                }
                other => {
                    send(WireMessage::error(
                        msg.session_id,
                        format!("{} before session_open; closing", other.kind()),
                    ))?;
                    return Ok(());
                }
            }
            continue;
        };

        let id = s.id.clone();
        match msg.body {
            Body::WordEvent { speaker, word, start_ms, end_ms } => {
                match s.ingest(WordEvent { speaker, word, start_ms, end_ms }) {
                    Ok(d) => send(WireMessage::new(id, Body::Decision(d)))?,
                    Err(e) => send(WireMessage::error(id, e.to_string()))?,
                }
            }
            Body::SetControls { c_bc, c_tc } => match s.set_controls(c_bc, c_tc) {
                Ok(d) => send(WireMessage::new(id, Body::ControlsAck { c_bc: d.c_bc, c_tc: d.c_tc }))?,
                Err(e) => send(WireMessage::error(id, e.to_string()))?,
            },
            Body::SessionClose {} => {
                send(WireMessage::new(id, Body::SessionClose {}))?;
                return Ok(());
            }
            other => send(WireMessage::error(id, format!("unexpected {} from client", other.kind())))?,
        }
    }
    Ok(())
}

/// A bound listener; one thread per connection.
pub struct Server {
    listener: TcpListener,
    ctx: ServiceContext,
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs, ctx: ServiceContext) -> Result<Self> {
        Ok(Self { listener: TcpListener::bind(addr)?, ctx })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accept connections until the stop flag is raised.
    pub fn run(self, stop: Arc<AtomicBool>) -> Result<()> {
        for stream in self.listener.incoming() {
            if stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let ctx = self.ctx.clone();
            std::thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = serve_stream(&ctx, stream) {
                    log::warn!("connection {peer:?}: {e}");
                }
            });
        }
        Ok(())
    }

    /// Run on a background thread.
    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::spawn(move || {
            if let Err(e) = self.run(flag) {
                log::error!("server stopped: {e}");
            }
        });
        Ok(ServerHandle { addr, stop, thread: Some(thread) })
    }
}

fn serve_stream(ctx: &ServiceContext, stream: TcpStream) -> Result<()> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    handle_connection(ctx, reader, stream)
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stop accepting and join the accept loop. Open connections finish on
    /// their own threads.
    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_and_join();
        }
    }
}
