//! Ordered, reliable duplex links between one participant and the coordinator.
//!
//! Both transports move the same encoded frames, so message sizes recorded in
//! a trace do not depend on the transport.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use super::message::{self, RoundMessage};
use crate::error::{Error, Result};

/// One end of a link.
pub trait Transport: Send {
    /// Sends a message and returns the frame size in bytes.
    fn send(&mut self, msg: &RoundMessage) -> Result<usize>;

    /// Waits up to `timeout` for the next message. `Ok(None)` means the
    /// deadline passed; a closed link is an `Abort` error.
    fn recv(&mut self, timeout: Duration) -> Result<Option<(RoundMessage, usize)>>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn send(&mut self, msg: &RoundMessage) -> Result<usize> {
        (**self).send(msg)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<(RoundMessage, usize)>> {
        (**self).recv(timeout)
    }
}

pub struct InProcessTransport {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
}

/// Connected pair of in-process endpoints.
pub fn in_process_pair() -> (InProcessTransport, InProcessTransport) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    (
        InProcessTransport { tx: tx_a, rx: rx_a },
        InProcessTransport { tx: tx_b, rx: rx_b },
    )
}

impl Transport for InProcessTransport {
    fn send(&mut self, msg: &RoundMessage) -> Result<usize> {
        let frame = message::encode_frame(msg)?;
        let len = frame.len();
        self.tx
            .send(frame)
            .map_err(|_| Error::Abort("peer disconnected".into()))?;
        Ok(len)
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<(RoundMessage, usize)>> {
        match self.rx.recv_timeout(timeout) {
            Ok(frame) => {
                let len = frame.len();
                Ok(Some((message::decode_frame(&frame)?, len)))
            }
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Abort("peer disconnected".into())),
        }
    }
}

pub struct TcpTransport {
    stream: TcpStream,
}

impl TcpTransport {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        Ok(TcpTransport { stream })
    }

    pub fn connect<A: ToSocketAddrs>(addr: A, timeout: Duration) -> Result<Self> {
        let deadline = Instant::now() + timeout;
        let addrs: Vec<SocketAddr> = addr.to_socket_addrs()?.collect();
        let mut last_err = None;
        // The coordinator may still be starting; retry until the deadline.
        while Instant::now() < deadline {
            for a in &addrs {
                match TcpStream::connect_timeout(a, Duration::from_millis(500)) {
                    Ok(stream) => return Self::new(stream),
                    Err(e) => last_err = Some(e),
                }
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        Err(Error::Abort(format!(
            "could not reach coordinator: {}",
            last_err.map_or_else(|| "no address".to_string(), |e| e.to_string())
        )))
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, msg: &RoundMessage) -> Result<usize> {
        message::write_frame(&mut self.stream, msg)
            .map_err(|e| Error::Abort(format!("send failed: {e}")))
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<(RoundMessage, usize)>> {
        self.stream
            .set_read_timeout(Some(timeout.max(Duration::from_millis(1))))?;
        match message::read_frame(&mut self.stream) {
            Ok(got) => Ok(Some(got)),
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
                ) =>
            {
                Ok(None)
            }
            Err(e) => Err(Error::Abort(format!("receive failed: {e}"))),
        }
    }
}

/// Listening side for participants connecting over TCP.
pub struct TcpHub {
    listener: TcpListener,
}

impl TcpHub {
    pub fn bind<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        Ok(TcpHub {
            listener: TcpListener::bind(addr)?,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts `count` connections, in arrival order, before `timeout`.
    pub fn accept(&self, count: usize, timeout: Duration) -> Result<Vec<TcpTransport>> {
        let deadline = Instant::now() + timeout;
        self.listener.set_nonblocking(true)?;
        let mut links = Vec::with_capacity(count);
        while links.len() < count {
            match self.listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    links.push(TcpTransport::new(stream)?);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(Error::Abort(format!(
                            "only {} of {count} participants connected",
                            links.len()
                        )));
                    }
                    std::thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }
        self.listener.set_nonblocking(false)?;
        Ok(links)
    }
}
