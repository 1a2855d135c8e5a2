//! Out-of-process oracles and generators over a line-oriented JSON protocol.
//!
//! A plugin is any executable that reads requests on stdin and writes one
//! reply line per request on stdout. See [`protocol`] for the message shapes.

mod client;
pub mod protocol;
mod server;

pub use client::{
    timeout_from_env, Connection, Handshake, SubprocessGenerator, SubprocessOracle, DEFAULT_TIMEOUT, TIMEOUT_ENV,
};
pub use protocol::{Reply, Request, Role, PROTOCOL_VERSION};
pub use server::{serve, serve_generator, serve_oracle};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::generators::{AffineDecoder, Generator};
    use crate::latent::LatentVector;
    use crate::oracles::{CentroidSoftmaxModel, Oracle};
    use std::io::BufReader;
    use std::thread;
    use std::time::Duration;

    /// Runs `server` on a thread at the far end of a pair of pipes.
    fn piped<F>(server: F) -> Connection
    where
        F: FnOnce(BufReader<std::io::PipeReader>, std::io::PipeWriter) + Send + 'static,
    {
        let (req_r, req_w) = std::io::pipe().unwrap();
        let (rep_r, rep_w) = std::io::pipe().unwrap();
        thread::spawn(move || server(BufReader::new(req_r), rep_w));
        Connection::from_streams(rep_r, req_w, Duration::from_secs(5), "in-thread")
    }

    fn centroid() -> CentroidSoftmaxModel {
        CentroidSoftmaxModel::new(vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![-3.0, 0.5]], 1.7).unwrap()
    }

    #[test]
    fn piped_oracle_matches_in_process() {
        let model = centroid();
        let served = model.clone();
        let remote = SubprocessOracle::connect(piped(move |r, w| {
            serve_oracle(&served, r, w).unwrap();
        }))
        .unwrap();
        assert_eq!(remote.num_classes(), 3);
        assert_eq!(remote.sample_dim(), Some(2));
        let batch = vec![vec![0.3, 0.1], vec![-2.0, 4.0], vec![1.0, 1.0]];
        assert_eq!(
            remote.predict_batch(&batch).unwrap(),
            model.predict_batch(&batch).unwrap()
        );
        assert!(remote.predict_batch(&[]).unwrap().is_empty());
    }

    #[test]
    fn piped_generator_matches_in_process() {
        let dec = AffineDecoder::new(&[vec![1.0, 2.0], vec![-0.5, 0.25], vec![0.0, 3.0]], vec![0.1, 0.2, 0.3]).unwrap();
        let served = dec.clone();
        let remote = SubprocessGenerator::connect(piped(move |r, w| {
            serve_generator(&served, r, w).unwrap();
        }))
        .unwrap();
        assert_eq!((remote.latent_dim(), remote.sample_dim()), (2, 3));
        let zs: Vec<_> = [[0.5, 0.5], [-1.0, 2.0]]
            .iter()
            .map(|z| LatentVector::new(z.to_vec()).unwrap())
            .collect();
        assert_eq!(remote.decode_batch(&zs).unwrap(), dec.decode_batch(&zs).unwrap());
    }

    #[test]
    fn short_reply_is_row_count_mismatch() {
        let remote = SubprocessOracle::connect(piped(|r, w| {
            serve(
                Reply::oracle_hello(2, 1),
                |mut s| {
                    s.pop();
                    Ok(s.into_iter().map(|_| vec![0.5, 0.5]).collect())
                },
                r,
                w,
            )
            .unwrap();
        }))
        .unwrap();
        let err = remote.predict_batch(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap_err();
        assert!(err.to_string().contains("row count mismatch"), "{err}");
    }

    #[test]
    fn bad_normalization_rejected() {
        let remote = SubprocessOracle::connect(piped(|r, w| {
            serve(
                Reply::oracle_hello(2, 1),
                |s| Ok(s.into_iter().map(|_| vec![0.6, 0.6]).collect()),
                r,
                w,
            )
            .unwrap();
        }))
        .unwrap();
        let err = remote.predict_batch(&[vec![1.0]]).unwrap_err();
        assert!(err.to_string().contains("normalization violated"), "{err}");
    }

    #[test]
    fn plugin_error_reply_surfaces() {
        let remote = SubprocessOracle::connect(piped(|r, w| {
            serve(Reply::oracle_hello(2, 1), |_| Err("model exploded".into()), r, w).unwrap();
        }))
        .unwrap();
        assert!(matches!(
            remote.predict_batch(&[vec![1.0]]),
            Err(Error::PluginReported(m)) if m == "model exploded"
        ));
    }

    #[test]
    fn role_mismatch_rejected() {
        let conn = piped(|r, w| {
            serve(Reply::generator_hello(1, 1), Ok, r, w).unwrap();
        });
        assert!(matches!(SubprocessOracle::connect(conn), Err(Error::Protocol(_))));
    }

    #[test]
    fn silent_peer_times_out() {
        let (req_r, req_w) = std::io::pipe().unwrap();
        let (rep_r, rep_w) = std::io::pipe().unwrap();
        let keep = thread::spawn(move || {
            thread::sleep(Duration::from_millis(600));
            drop((req_r, rep_w));
        });
        let mut conn = Connection::from_streams(rep_r, req_w, Duration::from_millis(100), "silent");
        assert!(matches!(conn.handshake(), Err(Error::PluginTimeout(_))));
        keep.join().unwrap();
    }

    #[test]
    fn closed_peer_reports_exit() {
        let mut conn = piped(|r, w| drop((r, w)));
        assert!(matches!(conn.handshake(), Err(Error::PluginExited { .. })));
    }

    #[test]
    fn server_rejects_unknown_protocol_version() {
        let mut conn = piped(move |r, w| serve_oracle(&centroid(), r, w).unwrap());
        let err = conn.request(&Request::Hello { protocol: 9 }).unwrap_err();
        assert!(err.to_string().contains("unsupported protocol version 9"));
    }
}
