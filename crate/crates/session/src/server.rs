//! Blocking TCP transport: one thread per connection, models shared read-only.

use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use gazeintent::intent::IntentModels;

use crate::log::SessionLog;
use crate::protocol::{decode_server, encode_client, encode_server, read_frame, write_frame, ClientMessage, ServerMessage};
use crate::session::{Connection, SessionConfig};

pub struct Server {
    listener: TcpListener,
    models: Arc<IntentModels>,
    cfg: SessionConfig,
    log_dir: Option<PathBuf>,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, models: Arc<IntentModels>, cfg: SessionConfig) -> io::Result<Server> {
        Ok(Server { listener: TcpListener::bind(addr)?, models, cfg, log_dir: None })
    }

    /// Write one session log per connection into `dir`.
    pub fn with_log_dir(mut self, dir: PathBuf) -> Self {
        self.log_dir = Some(dir);
        self
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until `limit` have been served (forever if `None`),
    /// then waits for the open ones to finish.
    pub fn run(self, limit: Option<usize>) -> io::Result<()> {
        let mut handles = Vec::new();
        for (n, stream) in self.listener.incoming().enumerate() {
            let stream = stream?;
            let models = self.models.clone();
            let cfg = self.cfg.clone();
            let log_path = self.log_dir.as_ref().map(|d| d.join(format!("session-{n:04}.jsonl")));
            handles.push(thread::spawn(move || {
                if let Err(e) = serve_connection(stream, models, cfg, log_path) {
                    log::warn!("connection {n}: {e}");
                }
            }));
            if limit.is_some_and(|l| n + 1 >= l) {
                break;
            }
        }
        for h in handles {
            let _ = h.join();
        }
        Ok(())
    }
}

fn serve_connection(stream: TcpStream, models: Arc<IntentModels>, cfg: SessionConfig, log_path: Option<PathBuf>) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut conn = Connection::new(models, cfg);
    let result = loop {
        match read_frame(&mut reader) {
            Ok(Some(body)) => {
                let out = conn.handle_frame(&body);
                if let Err(e) = write_frame(&mut writer, &encode_server(&out)) {
                    break Err(e);
                }
            }
            Ok(None) => break Ok(()),
            Err(e) => break Err(e),
        }
    };
    if let (Some(path), Some(log)) = (log_path, SessionLog::from_connection(&conn)) {
        log.write(BufWriter::new(std::fs::File::create(path)?))?;
    }
    result
}

/// Lockstep client: every request returns the server's single reply frame.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Client {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Client> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) })
    }

    pub fn request(&mut self, msg: &ClientMessage) -> io::Result<Vec<ServerMessage>> {
        self.request_raw(&encode_client(msg))
    }

    /// Sends an arbitrary frame body; used to probe protocol handling.
    pub fn request_raw(&mut self, body: &[u8]) -> io::Result<Vec<ServerMessage>> {
        write_frame(&mut self.writer, body)?;
        let reply = read_frame(&mut self.reader)?.ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof))?;
        decode_server(&reply).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}
