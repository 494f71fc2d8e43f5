//! End-to-end tests of the HTTP surface on an ephemeral port.

use serde_json::{json, Value};

async fn spawn() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, tunnelfit_server::app()).await.unwrap();
    });
    format!("http://{addr}")
}

async fn post(base: &str, path: &str, body: Value) -> (u16, String) {
    let client = reqwest::Client::new();
    let resp = client
        .post(format!("{base}{path}"))
        .json(&body)
        .send()
        .await
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.text().await.unwrap())
}

fn error_code(body: &str) -> String {
    let v: Value = serde_json::from_str(body).unwrap();
    v["error"]["code"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_is_ok() {
    let base = spawn().await;
    let resp = reqwest::get(format!("{base}/health")).await.unwrap();
    assert_eq!(resp.status().as_u16(), 200);
}

#[tokio::test]
async fn simulate_default_emits_400_rows_deterministically() {
    let base = spawn().await;
    let (status, csv) = post(&base, "/v1/simulate", json!({})).await;
    assert_eq!(status, 200);
    let lines: Vec<&str> = csv.lines().collect();
    // 3 metadata lines + column header + 4 anchors x 100 iterations.
    assert_eq!(lines.len(), 4 + 400);
    assert_eq!(lines[0], "# tunnel=reference");
    assert_eq!(lines[3], "anchor_pos,loss_bs1,loss_bs2,iteration");
    let (_, again) = post(&base, "/v1/simulate", json!({})).await;
    assert_eq!(csv, again, "same seed must be byte-identical");
}

#[tokio::test]
async fn simulate_noiseless_rows_match_the_model() {
    let base = spawn().await;
    let (status, csv) =
        post(&base, "/v1/simulate", json!({"noise_sigma_db": 0.0, "iterations": 1})).await;
    assert_eq!(status, 200);
    let first_row = csv.lines().nth(4).unwrap();
    assert_eq!(first_row, "15,63.72182518111363,121.17940008672038,0");
}

#[tokio::test]
async fn fit_recovers_reference_from_noiseless_campaign() {
    let base = spawn().await;
    let (_, csv) =
        post(&base, "/v1/simulate", json!({"noise_sigma_db": 0.0, "iterations": 1})).await;
    let (status, body) = post(&base, "/v1/fit", json!({ "campaign_csv": csv })).await;
    assert_eq!(status, 200, "{body}");
    let model: Value = serde_json::from_str(&body).unwrap();
    assert!((model["gamma"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((model["c"].as_f64().unwrap() - 20.1).abs() < 1e-6);
    assert!((model["d0_m"].as_f64().unwrap() - 50.0).abs() < 1e-3);
    assert!((model["alpha_db_per_m"].as_f64().unwrap() - 0.2).abs() < 1e-6);
    assert_eq!(model["provenance"]["source"].as_str().unwrap(), "campaign:reference");
}

#[tokio::test]
async fn fit_reports_parse_errors_with_row_and_column() {
    let base = spawn().await;
    let campaign = "# tunnel=t\n# bs1_pos=0\n# bs2_pos=300\n\
                    anchor_pos,loss_bs1,loss_bs2,iteration\n15,oops,70,0\n";
    let (status, body) = post(&base, "/v1/fit", json!({ "campaign_csv": campaign })).await;
    assert_eq!(status, 400);
    assert_eq!(error_code(&body), "parse");
    assert!(body.contains("line 5"), "{body}");
    assert!(body.contains("loss_bs1"), "{body}");
}

#[tokio::test]
async fn fit_rejects_one_region_campaigns_as_unidentifiable() {
    let base = spawn().await;
    // Short corridor: every distance is in the near region of the curve the
    // losses were sampled from.
    let mut campaign = String::from(
        "# tunnel=short\n# bs1_pos=0\n# bs2_pos=12\nanchor_pos,loss_bs1,loss_bs2,iteration\n",
    );
    for pos in [2.0f64, 4.0, 6.0, 8.0, 10.0] {
        let l1 = 2.0 * (10.0 * pos.log10() + 20.1);
        let l2 = 2.0 * (10.0 * (12.0 - pos).log10() + 20.1);
        campaign.push_str(&format!("{pos},{l1},{l2},0\n"));
    }
    let (status, body) = post(&base, "/v1/fit", json!({ "campaign_csv": campaign })).await;
    assert_eq!(status, 422, "{body}");
    assert_eq!(error_code(&body), "identifiability");
}

#[tokio::test]
async fn convergence_matrix_shape_and_order() {
    let base = spawn().await;
    let req = json!({
        "iterations": 3,
        "policies": [{"uniform": 4}, {"explicit": [15.0, 30.0, 270.0, 285.0]}],
        "seeds": [7, 3]
    });
    let (status, csv) = post(&base, "/v1/convergence", req).await;
    assert_eq!(status, 200);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "policy,seed,iteration,gamma,c,d0_m,alpha_db_per_m,sse_db2");
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
    assert!(lines[1].starts_with("uniform-4,3,1,"));
    assert!(lines[4].starts_with("uniform-4,7,1,"));
    assert!(lines[7].starts_with("explicit-15-30-270-285,3,1,"));
}

#[tokio::test]
async fn locate_two_stations_round_trip() {
    let base = spawn().await;
    let req = json!({
        "model": {"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.2},
        "bs1_pos_m": 0.0, "bs2_pos_m": 300.0,
        "loss_bs1_db": 84.17940008672038,
        "loss_bs2_db": 104.17940008672038
    });
    let (status, body) = post(&base, "/v1/locate", req).await;
    assert_eq!(status, 200, "{body}");
    let report: Value = serde_json::from_str(&body).unwrap();
    assert!((report["position_m"].as_f64().unwrap() - 100.0).abs() < 1e-6);
    let d1 = report["d1_m"].as_f64().unwrap();
    let d2 = report["d2_m"].as_f64().unwrap();
    assert!((d1 + d2 - 300.0).abs() < 1e-9);
}

#[tokio::test]
async fn locate_single_station_with_rssi_and_range_warning() {
    let base = spawn().await;
    let model = json!({"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.2});
    // loss = 15 - (-45.2) = 60.2 -> 10 m from the station.
    let req = json!({
        "model": model, "bs_pos_m": 0.0, "direction": "positive",
        "rssi_dbm": -45.2, "tx_power_dbm": 15.0
    });
    let (status, body) = post(&base, "/v1/locate", req.clone()).await;
    assert_eq!(status, 200, "{body}");
    let report: Value = serde_json::from_str(&body).unwrap();
    assert!((report["position_m"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert_eq!(report["normalized"], Value::Bool(false));
    assert!(report["d2_m"].is_null());

    // Same but with a known extent the estimate escapes.
    let model = json!({"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.2});
    let out_of_range = json!({
        "model": model, "bs_pos_m": 0.0, "direction": "negative",
        "loss_db": 60.2, "bs1_pos_m": 0.0, "bs2_pos_m": 300.0
    });
    let (status, body) = post(&base, "/v1/locate", out_of_range).await;
    assert_eq!(status, 200, "{body}");
    let report: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(report["warnings"][0], "position-outside-span");
}

#[tokio::test]
async fn locate_input_validation_and_inversion_codes() {
    let base = spawn().await;
    let model = json!({"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.2});
    // RSSI without transmit power is an explicit error, not a default.
    let req = json!({
        "model": model, "bs_pos_m": 0.0, "direction": "positive", "rssi_dbm": -60.0
    });
    let (status, body) = post(&base, "/v1/locate", req).await;
    assert_eq!(status, 422);
    assert_eq!(error_code(&body), "validation");
    assert!(body.contains("tx_power_dbm"), "{body}");

    // Flat far region cannot be inverted above the break-point loss.
    let flat = json!({
        "model": {"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.0},
        "bs1_pos_m": 0.0, "bs2_pos_m": 300.0,
        "loss_bs1_db": 100.0, "loss_bs2_db": 70.0
    });
    let (status, body) = post(&base, "/v1/locate", flat).await;
    assert_eq!(status, 422);
    assert_eq!(error_code(&body), "inversion");

    // No signal at all.
    let model = json!({"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.2});
    let (status, body) = post(&base, "/v1/locate", json!({ "model": model })).await;
    assert_eq!(status, 422);
    assert_eq!(error_code(&body), "validation");
}

#[tokio::test]
async fn eval_tabulates_the_curve() {
    let base = spawn().await;
    let req = json!({
        "model": {"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.2},
        "start_m": 1.0, "end_m": 300.0, "step_m": 1.0
    });
    let (status, csv) = post(&base, "/v1/eval", req).await;
    assert_eq!(status, 200);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 301);
    assert!(lines[50].starts_with("50,74.1794000867"));
}

#[tokio::test]
async fn model_operations() {
    let base = spawn().await;
    let model = json!({"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.2});
    let (_, body) =
        post(&base, "/v1/model/path-loss", json!({"model": model, "distance_m": 300.0})).await;
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!((v["loss_db"].as_f64().unwrap() - 124.17940008672038).abs() < 1e-9);

    let model = json!({"gamma": 2.0, "c": 20.1, "d0_m": 50.0, "alpha_db_per_m": 0.2});
    let (_, body) = post(&base, "/v1/model/invert", json!({"model": model, "loss_db": 60.2})).await;
    let v: Value = serde_json::from_str(&body).unwrap();
    assert!((v["distance_m"].as_f64().unwrap() - 10.0).abs() < 1e-9);

    let (_, body) =
        post(&base, "/v1/model/fresnel", json!({"h_r_m": 1.5, "h_t_m": 1.5, "lambda_m": 0.125}))
            .await;
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["break_point_m"].as_f64().unwrap(), 72.0);

    let (_, body) =
        post(&base, "/v1/model/normalize", json!({"d1_m": 30.0, "d2_m": 90.0, "span_m": 80.0}))
            .await;
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["d1_m"].as_f64().unwrap(), 20.0);
    assert_eq!(v["d2_m"].as_f64().unwrap(), 60.0);
}

#[tokio::test]
async fn tunnel_session_lifecycle() {
    let base = spawn().await;
    let create = json!({
        "tunnel_id": "mine-a",
        "bs1_pos_m": 0.0, "bs2_pos_m": 300.0,
        "anchors_m": [15.0, 30.0, 270.0, 285.0]
    });
    let (status, body) = post(&base, "/v1/tunnels", create.clone()).await;
    assert_eq!(status, 200, "{body}");
    let summary: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(summary["tunnel_id"], "mine-a");
    assert_eq!(summary["observation_count"], 0);

    // Duplicate id rejected.
    let (status, body) = post(&base, "/v1/tunnels", create).await;
    assert_eq!(status, 422);
    assert!(body.contains("already exists"));

    // Push noiseless engagements for every anchor; iteration auto-assigns.
    let reference = [
        (0usize, 63.72182518111363, 121.17940008672038),
        (1, 69.74242509439325, 118.17940008672038),
        (2, 118.17940008672038, 69.74242509439325),
        (3, 121.17940008672038, 63.72182518111363),
    ];
    for (idx, l1, l2) in reference {
        let (status, body) = post(
            &base,
            "/v1/tunnels/mine-a/engagements",
            json!({"anchor_index": idx, "loss_bs1_db": l1, "loss_bs2_db": l2}),
        )
        .await;
        assert_eq!(status, 200, "{body}");
    }
    let (_, body) = post(&base, "/v1/tunnels/mine-a/fit", json!({})).await;
    let model: Value = serde_json::from_str(&body).unwrap();
    assert!((model["gamma"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(model["provenance"]["source"], "tunnel:mine-a");

    // The stored model serves positioning.
    let (status, body) = post(
        &base,
        "/v1/tunnels/mine-a/locate",
        json!({"loss_bs1_db": 84.17940008672038, "loss_bs2_db": 104.17940008672038}),
    )
    .await;
    assert_eq!(status, 200, "{body}");
    let report: Value = serde_json::from_str(&body).unwrap();
    assert!((report["position_m"].as_f64().unwrap() - 100.0).abs() < 1e-4);

    // Listing, fetching the model, and deletion.
    let list: Value = reqwest::get(format!("{base}/v1/tunnels")).await.unwrap().json().await.unwrap();
    assert_eq!(list.as_array().unwrap().len(), 1);
    let stored: Value =
        reqwest::get(format!("{base}/v1/tunnels/mine-a/model")).await.unwrap().json().await.unwrap();
    assert_eq!(stored["provenance"]["source"], "tunnel:mine-a");
    let client = reqwest::Client::new();
    let resp = client.delete(format!("{base}/v1/tunnels/mine-a")).send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    let resp = reqwest::get(format!("{base}/v1/tunnels/mine-a")).await.unwrap();
    assert_eq!(resp.status().as_u16(), 404);
}

#[tokio::test]
async fn tunnel_errors() {
    let base = spawn().await;
    let (status, body) = post(&base, "/v1/tunnels/nope/fit", json!({})).await;
    assert_eq!(status, 404);
    assert_eq!(error_code(&body), "not_found");

    let (_, _) = post(
        &base,
        "/v1/tunnels",
        json!({"tunnel_id": "t", "bs1_pos_m": 0.0, "bs2_pos_m": 100.0, "anchors_m": [50.0]}),
    )
    .await;
    let (status, body) = post(
        &base,
        "/v1/tunnels/t/engagements",
        json!({"anchor_index": 5, "loss_bs1_db": 1.0, "loss_bs2_db": 2.0}),
    )
    .await;
    assert_eq!(status, 422);
    assert!(body.contains("out of range"), "{body}");

    // Locate before any fit.
    let (status, body) = post(&base, "/v1/tunnels/t/locate", json!({"loss_db": 60.0})).await;
    assert_eq!(status, 422);
    assert!(body.contains("no fitted model"), "{body}");
}
