//! Datagram transports: an in-process bounded channel and UDP.

use std::collections::VecDeque;
use std::io::ErrorKind;
use std::net::{SocketAddr, UdpSocket};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::wire::MAX_DATAGRAM;
use super::ProtocolError;

pub trait DatagramSender: Send {
    fn send(&mut self, datagram: &[u8]) -> Result<(), ProtocolError>;
}

pub trait DatagramReceiver: Send {
    /// Waits up to `timeout` for the next datagram.
    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, ProtocolError>;

    fn try_recv(&mut self) -> Result<Option<Vec<u8>>, ProtocolError> {
        self.recv_timeout(Duration::ZERO)
    }

    /// Drains everything queued and returns only the newest datagram.
    fn recv_latest(&mut self) -> Result<Option<Vec<u8>>, ProtocolError> {
        let mut latest = None;
        while let Some(d) = self.try_recv()? {
            latest = Some(d);
        }
        Ok(latest)
    }
}

impl<T: DatagramSender + ?Sized> DatagramSender for Box<T> {
    fn send(&mut self, datagram: &[u8]) -> Result<(), ProtocolError> {
        (**self).send(datagram)
    }
}

impl<T: DatagramReceiver + ?Sized> DatagramReceiver for Box<T> {
    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, ProtocolError> {
        (**self).recv_timeout(timeout)
    }
}

#[derive(Debug, Default)]
struct Queue {
    items: VecDeque<Vec<u8>>,
    overwritten: u64,
}

#[derive(Debug)]
struct Shared {
    queue: Mutex<Queue>,
    ready: Condvar,
    capacity: usize,
}

/// Sending half of [`shared_channel`].
#[derive(Debug, Clone)]
pub struct ChannelSender {
    shared: Arc<Shared>,
}

/// Receiving half of [`shared_channel`].
#[derive(Debug)]
pub struct ChannelReceiver {
    shared: Arc<Shared>,
}

/// Bounded in-process datagram channel. When full, the oldest datagram is
/// discarded so a slow reader always sees the freshest samples.
pub fn shared_channel(capacity: usize) -> (ChannelSender, ChannelReceiver) {
    let shared = Arc::new(Shared {
        queue: Mutex::new(Queue::default()),
        ready: Condvar::new(),
        capacity: capacity.max(1),
    });
    (
        ChannelSender {
            shared: Arc::clone(&shared),
        },
        ChannelReceiver { shared },
    )
}

impl ChannelSender {
    /// Datagrams discarded because the queue was full.
    pub fn overwritten(&self) -> u64 {
        self.shared.queue.lock().unwrap().overwritten
    }
}

impl ChannelReceiver {
    pub fn len(&self) -> usize {
        self.shared.queue.lock().unwrap().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.shared.capacity
    }
}

impl DatagramSender for ChannelSender {
    fn send(&mut self, datagram: &[u8]) -> Result<(), ProtocolError> {
        if datagram.len() > MAX_DATAGRAM {
            return Err(ProtocolError::Oversize { len: datagram.len() });
        }
        let mut q = self.shared.queue.lock().unwrap();
        if q.items.len() >= self.shared.capacity {
            q.items.pop_front();
            q.overwritten += 1;
        }
        q.items.push_back(datagram.to_vec());
        drop(q);
        self.shared.ready.notify_one();
        Ok(())
    }
}

impl DatagramReceiver for ChannelReceiver {
    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, ProtocolError> {
        let q = self.shared.queue.lock().unwrap();
        let (mut q, _) = self
            .shared
            .ready
            .wait_timeout_while(q, timeout, |q| q.items.is_empty())
            .unwrap();
        Ok(q.items.pop_front())
    }

    fn recv_latest(&mut self) -> Result<Option<Vec<u8>>, ProtocolError> {
        let mut q = self.shared.queue.lock().unwrap();
        let latest = q.items.pop_back();
        q.items.clear();
        Ok(latest)
    }
}

/// UDP datagrams to a fixed peer.
#[derive(Debug)]
pub struct UdpSender {
    socket: UdpSocket,
    peer: SocketAddr,
}

impl UdpSender {
    pub fn bind(local: SocketAddr, peer: SocketAddr) -> Result<Self, ProtocolError> {
        Ok(Self {
            socket: UdpSocket::bind(local)?,
            peer,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ProtocolError> {
        Ok(self.socket.local_addr()?)
    }
}

impl DatagramSender for UdpSender {
    fn send(&mut self, datagram: &[u8]) -> Result<(), ProtocolError> {
        if datagram.len() > MAX_DATAGRAM {
            return Err(ProtocolError::Oversize { len: datagram.len() });
        }
        self.socket.send_to(datagram, self.peer)?;
        Ok(())
    }
}

#[derive(Debug)]
pub struct UdpReceiver {
    socket: UdpSocket,
    buf: Vec<u8>,
}

impl UdpReceiver {
    pub fn bind(local: SocketAddr) -> Result<Self, ProtocolError> {
        Ok(Self {
            socket: UdpSocket::bind(local)?,
            // One byte beyond the limit so oversize datagrams are detectable.
            buf: vec![0; MAX_DATAGRAM + 1],
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, ProtocolError> {
        Ok(self.socket.local_addr()?)
    }
}

impl DatagramReceiver for UdpReceiver {
    fn recv_timeout(&mut self, timeout: Duration) -> Result<Option<Vec<u8>>, ProtocolError> {
        if timeout.is_zero() {
            self.socket.set_nonblocking(true)?;
        } else {
            self.socket.set_nonblocking(false)?;
            self.socket.set_read_timeout(Some(timeout))?;
        }
        match self.socket.recv_from(&mut self.buf) {
            Ok((n, _)) => Ok(Some(self.buf[..n].to_vec())),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}
