//! The typed client against a live server.

use tunnelfit_client::{Client, ClientError};
use tunnelfit_core::api::{
    CreateTunnelRequest, EngagementRequest, FitRequest, SimulateRequest, TunnelFitRequest,
    TunnelLocateRequest,
};

async fn spawn() -> Client {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, tunnelfit_server::app()).await.unwrap();
    });
    Client::new(format!("http://{addr}"))
}

#[tokio::test]
async fn simulate_fit_locate_through_the_client() {
    let client = spawn().await;
    client.health().await.unwrap();

    let campaign = client
        .simulate(&SimulateRequest { noise_sigma_db: 0.0, iterations: 1, ..Default::default() })
        .await
        .unwrap();
    let model = client
        .fit(&FitRequest { campaign_csv: campaign, options: Default::default(), source: None })
        .await
        .unwrap();
    assert!((model.gamma - 2.0).abs() < 1e-6);

    let summary = client
        .create_tunnel(&CreateTunnelRequest {
            tunnel_id: None,
            bs1_pos_m: 0.0,
            bs2_pos_m: 300.0,
            anchors_m: vec![15.0, 30.0, 270.0, 285.0],
        })
        .await
        .unwrap();
    assert!(summary.tunnel_id.starts_with("tunnel-"));
    for (idx, l1, l2) in [
        (0usize, 63.72182518111363, 121.17940008672038),
        (1, 69.74242509439325, 118.17940008672038),
        (2, 118.17940008672038, 69.74242509439325),
        (3, 121.17940008672038, 63.72182518111363),
    ] {
        client
            .engage(
                &summary.tunnel_id,
                &EngagementRequest {
                    anchor_index: idx,
                    loss_bs1_db: l1,
                    loss_bs2_db: l2,
                    iteration: None,
                },
            )
            .await
            .unwrap();
    }
    client.fit_tunnel(&summary.tunnel_id, &TunnelFitRequest::default()).await.unwrap();
    let report = client
        .locate_in_tunnel(
            &summary.tunnel_id,
            &TunnelLocateRequest {
                signal: tunnelfit_core::api::SignalInput {
                    loss_bs1_db: Some(84.17940008672038),
                    loss_bs2_db: Some(104.17940008672038),
                    ..Default::default()
                },
            },
        )
        .await
        .unwrap();
    assert!((report.position_m - 100.0).abs() < 1e-4);
}

#[tokio::test]
async fn api_errors_decode_into_codes() {
    let client = spawn().await;
    let err = client
        .fit(&FitRequest {
            campaign_csv: "garbage".to_string(),
            options: Default::default(),
            source: None,
        })
        .await
        .unwrap_err();
    match &err {
        ClientError::Api { status, code, .. } => {
            assert_eq!(*status, 400);
            assert_eq!(code, "parse");
        }
        other => panic!("expected api error, got {other:?}"),
    }
    assert_eq!(err.api_code(), Some("parse"));

    let err = client.tunnel_model("missing").await.unwrap_err();
    assert_eq!(err.api_code(), Some("not_found"));
}
