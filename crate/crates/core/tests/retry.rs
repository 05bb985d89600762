mod common;

use common::FakeServer;
use soapbench::llm::{Backend, LlmError, RemoteBackend};
use soapbench::prompt::{Message, RenderedPrompt, Role};

fn prompt() -> RenderedPrompt {
    RenderedPrompt {
        messages: vec![
            Message {
                role: Role::System,
                content: "Write a SOAP report.".into(),
            },
            Message {
                role: Role::User,
                content: "Patient: my ear hurts".into(),
            },
        ],
    }
}

fn set_key(var: &str) {
    std::env::set_var(var, "sk-test-secret");
}

#[tokio::test]
async fn rate_limits_are_retried_until_success() {
    let server = FakeServer::start(&[429, 429, 200]).await;
    set_key("SOAPBENCH_TEST_KEY_RETRY");
    let config = server.backend_config("SOAPBENCH_TEST_KEY_RETRY");
    let backend = RemoteBackend::new(&config).unwrap();
    let resp = backend.complete(&config.request(&prompt(), 0)).await.unwrap();
    assert_eq!(resp.text, "S: pain\nO: red\nA: otitis\nP: rest");
    assert_eq!(resp.prompt_tokens, Some(12));
    assert_eq!(backend.attempts(), 3);
    assert_eq!(server.hits(), 3);
}

#[tokio::test]
async fn auth_failure_is_not_retried() {
    let server = FakeServer::start(&[401]).await;
    set_key("SOAPBENCH_TEST_KEY_AUTH");
    let config = server.backend_config("SOAPBENCH_TEST_KEY_AUTH");
    let backend = RemoteBackend::new(&config).unwrap();
    let err = backend.complete(&config.request(&prompt(), 0)).await.unwrap_err();
    assert!(matches!(err, LlmError::AuthError { status: 401 }), "{err:?}");
    assert_eq!(backend.attempts(), 1);
    assert_eq!(server.hits(), 1);
}

#[tokio::test]
async fn server_errors_give_up_after_max_attempts() {
    let server = FakeServer::start(&[503]).await;
    set_key("SOAPBENCH_TEST_KEY_5XX");
    let config = server.backend_config("SOAPBENCH_TEST_KEY_5XX");
    let backend = RemoteBackend::new(&config).unwrap();
    let err = backend.complete(&config.request(&prompt(), 0)).await.unwrap_err();
    assert!(matches!(err, LlmError::ServerError { status: 503, attempts: 5 }), "{err:?}");
    assert_eq!(server.hits(), 5);
}

#[tokio::test]
async fn bad_request_fails_without_retry() {
    let server = FakeServer::start(&[400]).await;
    set_key("SOAPBENCH_TEST_KEY_400");
    let config = server.backend_config("SOAPBENCH_TEST_KEY_400");
    let backend = RemoteBackend::new(&config).unwrap();
    let err = backend.complete(&config.request(&prompt(), 0)).await.unwrap_err();
    assert!(matches!(err, LlmError::Status { status: 400, .. }), "{err:?}");
    assert_eq!(server.hits(), 1);
}

#[tokio::test]
async fn wire_shape_and_credential_handling() {
    let server = FakeServer::start(&[200]).await;
    set_key("SOAPBENCH_TEST_KEY_WIRE");
    let mut config = server.backend_config("SOAPBENCH_TEST_KEY_WIRE");
    config.max_output_tokens = Some(256);
    let backend = Backend::from_config(&config).unwrap();
    backend.complete(&config.request(&prompt(), 7)).await.unwrap();

    assert_eq!(*server.auth_headers.lock().unwrap(), vec!["Bearer sk-test-secret".to_string()]);
    let body = server.bodies.lock().unwrap()[0].clone();
    assert_eq!(body["model"], "gpt-4");
    assert_eq!(body["max_tokens"], 256);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "Patient: my ear hurts");
    assert!(body.get("run_index").is_none());

    if let Backend::Remote(remote) = &backend {
        assert!(!format!("{remote:?}").contains("sk-test-secret"));
    }
}

#[test]
fn missing_credential_names_the_variable() {
    let config = soapbench::llm::BackendConfig::remote("http://127.0.0.1:9/v1", "SOAPBENCH_TEST_KEY_UNSET");
    let err = RemoteBackend::new(&config).unwrap_err();
    assert!(matches!(&err, LlmError::MissingCredential(v) if v == "SOAPBENCH_TEST_KEY_UNSET"));
    assert!(err.to_string().contains("SOAPBENCH_TEST_KEY_UNSET"));
}
