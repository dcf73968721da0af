//! Credential-checked echo protocol used for latency probes.
//!
//! ```text
//! client -> server   u32 BE length || auth token
//! server -> client   0x01 accept | 0x00 reject
//! then, both ways    u32 BE length || payload
//! ```
//!
//! The server writes every echo frame's payload back verbatim. The auth
//! token is derived from the target's credential reference.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use sha2::{Digest as _, Sha256};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream, ToSocketAddrs};

pub const ACCEPT: u8 = 0x01;
pub const REJECT: u8 = 0x00;
/// Largest frame either side will read.
pub const MAX_FRAME: usize = 64 * 1024;
const MAX_AUTH_FRAME: usize = 1024;

pub fn auth_token(credential_ref: &str) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(b"edgeledger-echo-auth\0");
    h.update(credential_ref.as_bytes());
    h.finalize().to_vec()
}

pub async fn write_frame<W: AsyncWrite + Unpin>(w: &mut W, payload: &[u8]) -> std::io::Result<()> {
    let len = u32::try_from(payload.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "frame too large"))?;
    let mut buf = Vec::with_capacity(4 + payload.len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf).await?;
    w.flush().await
}

pub async fn read_frame<R: AsyncRead + Unpin>(r: &mut R, max: usize) -> std::io::Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).await?;
    let len = u32::from_be_bytes(len) as usize;
    if len > max {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds {max}"),
        ));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).await?;
    Ok(buf)
}

/// What an emulated link does to one echo reply.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkEffect {
    /// Reply after the given delay.
    Deliver(Duration),
    /// Close the connection without replying.
    Drop,
    /// Reply after the delay with a damaged payload.
    Garble(Duration),
}

/// Per-peer link emulation applied inside the echo path.
pub trait LinkModel: Send + Sync {
    fn on_reply(&self, peer: SocketAddr) -> LinkEffect;
}

/// Fixed symmetric one-way delay.
#[derive(Debug, Clone, Copy)]
pub struct FixedDelay(pub Duration);

impl LinkModel for FixedDelay {
    fn on_reply(&self, _peer: SocketAddr) -> LinkEffect {
        LinkEffect::Deliver(self.0 * 2)
    }
}

pub struct EchoServer {
    listener: TcpListener,
    token: Arc<Vec<u8>>,
    link: Option<Arc<dyn LinkModel>>,
}

impl EchoServer {
    pub async fn bind(addr: impl ToSocketAddrs, credential_ref: &str) -> std::io::Result<Self> {
        Ok(Self {
            listener: TcpListener::bind(addr).await?,
            token: Arc::new(auth_token(credential_ref)),
            link: None,
        })
    }

    pub fn with_link(mut self, link: Arc<dyn LinkModel>) -> Self {
        self.link = Some(link);
        self
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until `shutdown` resolves.
    pub async fn serve(self, shutdown: impl Future<Output = ()>) {
        tokio::pin!(shutdown);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = self.listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        let token = self.token.clone();
                        let link = self.link.clone();
                        tokio::spawn(async move {
                            if let Err(e) = handle(stream, peer, &token, link.as_deref()).await {
                                tracing::debug!(%peer, "echo connection ended: {e}");
                            }
                        });
                    }
                    Err(e) => {
                        tracing::warn!("echo accept failed: {e}");
                        tokio::time::sleep(Duration::from_millis(10)).await;
                    }
                },
            }
        }
    }
}

async fn handle(
    mut stream: TcpStream,
    peer: SocketAddr,
    token: &[u8],
    link: Option<&dyn LinkModel>,
) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let presented = read_frame(&mut stream, MAX_AUTH_FRAME).await?;
    if presented != token {
        stream.write_all(&[REJECT]).await?;
        return Ok(());
    }
    stream.write_all(&[ACCEPT]).await?;
    loop {
        let payload = match read_frame(&mut stream, MAX_FRAME).await {
            Ok(p) => p,
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        };
        let effect = link.map_or(LinkEffect::Deliver(Duration::ZERO), |l| l.on_reply(peer));
        match effect {
            LinkEffect::Deliver(d) => {
                sleep_nonzero(d).await;
                write_frame(&mut stream, &payload).await?;
            }
            LinkEffect::Garble(d) => {
                sleep_nonzero(d).await;
                let mut bad = payload;
                bad.push(b'?');
                write_frame(&mut stream, &bad).await?;
            }
            LinkEffect::Drop => return Ok(()),
        }
    }
}

async fn sleep_nonzero(d: Duration) {
    if !d.is_zero() {
        tokio::time::sleep(d).await;
    }
}

/// Runs an echo server on `listen` until the process receives Ctrl-C.
pub async fn serve_echo(listen: SocketAddr, credential_ref: &str) -> std::io::Result<()> {
    let server = EchoServer::bind(listen, credential_ref).await?;
    tracing::info!("echo listening on {}", server.local_addr()?);
    server
        .serve(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    Ok(())
}
