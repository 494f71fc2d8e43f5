//! Service connection: a remote URL when `--server` is given, otherwise an
//! ephemeral in-process service on a loopback port. Either way every command
//! runs as a client of the HTTP API.

use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use tunnelfit_client::Client;

use crate::CliError;

pub struct Service {
    pub client: Client,
    // Present only for the embedded service.
    shutdown: Option<(oneshot::Sender<()>, JoinHandle<()>)>,
}

impl Service {
    pub async fn connect(server: Option<&str>) -> Result<Self, CliError> {
        match server {
            Some(url) => Ok(Service { client: Client::new(url), shutdown: None }),
            None => {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
                    .await
                    .map_err(|e| CliError::Io(format!("cannot bind embedded service: {e}")))?;
                let addr = listener
                    .local_addr()
                    .map_err(|e| CliError::Io(format!("embedded service address: {e}")))?;
                let (tx, rx) = oneshot::channel::<()>();
                let handle = tokio::spawn(async move {
                    let server = axum::serve(listener, tunnelfit_server::app())
                        .with_graceful_shutdown(async {
                            let _ = rx.await;
                        });
                    if let Err(e) = server.await {
                        eprintln!("embedded service error: {e}");
                    }
                });
                Ok(Service {
                    client: Client::new(format!("http://{addr}")),
                    shutdown: Some((tx, handle)),
                })
            }
        }
    }

    /// Stops the embedded service, if any.
    pub async fn finish(self) {
        if let Some((tx, handle)) = self.shutdown {
            let _ = tx.send(());
            let _ = handle.await;
        }
    }
}
