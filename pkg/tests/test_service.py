import httpx
import pytest

from smokewatch.detector import ExclusionMask
from smokewatch.service import SmokewatchService
from smokewatch.store import replay

from service_env import CAMERA_JPEG, ServiceEnv


class TestPipeline:
    def test_raise_at_fifth_frame(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.step_frames(5)
        alerts = env.service.active_alerts_view()
        assert [a["alert_id"] for a in alerts] == ["cam1:5"]
        assert env.webhook_kinds() == ["raised"]
        assert env.service.metrics.snapshot()["alerts_raised"] == 1

    def test_no_alarm_when_positives_sparse(self, tmp_path):
        env = ServiceEnv(tmp_path, positive_frames=(3, 7))
        env.step_frames(10)
        assert env.service.active_alerts_view() == []
        assert env.webhook_calls == []

    def test_clear_after_m_negatives(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.step_frames(15)
        assert env.service.active_alerts_view() == []
        assert env.webhook_kinds() == ["raised", "cleared"]
        assert env.service.state.alarms["cam1"].phase == "cooldown"

    def test_camera_mask_suppresses_detections(self, tmp_path):
        env = ServiceEnv(tmp_path)
        # Fixture box spans (10,10)-(40,35) in a 64x48 source frame: its
        # center (25/64, 22.5/48) sits inside this mask.
        env.service.update_camera("cam1", masks=(ExclusionMask(0.2, 0.3, 0.6, 0.6),))
        env.step_frames(6)
        assert env.service.active_alerts_view() == []
        latest = env.service.latest_view("cam1")
        assert latest["detection_count"] == 0

    def test_poll_failures_recorded(self, tmp_path):
        calls = {"n": 0}

        def flaky(request):
            calls["n"] += 1
            if calls["n"] == 1:
                return httpx.Response(503)
            return httpx.Response(200, content=CAMERA_JPEG)

        env = ServiceEnv(tmp_path, camera_handler=flaky, positive_frames=())
        env.step_frames(1)
        assert env.service.metrics.snapshot()["poll_failures"] == 1
        assert env.service.state.poll_status["cam1"]["state"] == "backing_off"
        # Backoff: next attempt 2 intervals out, so one interval later nothing is due.
        env.step_frames(1)
        assert env.service.metrics.snapshot()["frames_polled"] == 0
        env.step_frames(2)
        assert env.service.metrics.snapshot()["frames_polled"] >= 1
        assert env.service.state.poll_status["cam1"]["state"] == "ok"

    def test_latency_metrics_accumulate(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.step_frames(2)
        counters = env.service.metrics.snapshot()
        assert counters["latency_poll_count"] == 2
        assert counters["latency_infer_count"] == 2
        assert counters["latency_postprocess_count"] == 2


class TestReplayEquivalence:
    def test_live_state_equals_replay(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.step_frames(5)
        env.service.ack_alert("cam1:5", "ranger")
        env.step_frames(10)
        replayed = replay(env.service.log.records(), env.service.params)
        assert replayed == env.service.state

    def test_alert_records_match_fold_events(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.step_frames(15)
        records = env.service.log.records()
        alert_recs = [r for r in records if r.kind == "alert"]
        assert [r.payload["kind"] for r in alert_recs] == ["raised", "cleared"]
        # Each alert record directly follows the detection record that caused it.
        for rec in alert_recs:
            prev = records[rec.seq - 2]
            assert prev.kind == "detection"
            assert prev.payload["frame_seq"] == rec.payload["frame_seq"]


class TestRestart:
    def test_restart_resumes_seq_and_alarm_state(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.step_frames(5)
        before = env.service.state
        env.service.stop()

        env2 = ServiceEnv(tmp_path, clock_start=env.clock.now())
        service2 = env2.service
        assert service2.state.alarms["cam1"] == before.alarms["cam1"]
        assert service2.state.active_alerts == before.active_alerts
        assert service2.registry.get("cam1").last_seq == 5
        # New frames continue numbering; no ordering violation.
        env2.step_frames(1)
        assert service2.state.alarms["cam1"].last_seq == 6

    def test_snapshot_written_on_stop_and_used_on_start(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.step_frames(4)
        env.service.stop()
        assert (tmp_path / "snapshot.json").exists()
        env2 = ServiceEnv(tmp_path, clock_start=env.clock.now())
        assert env2.service.state.alarms["cam1"].last_seq == 4

    def test_restart_does_not_duplicate_camera_config(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.step_frames(1)
        env.service.stop()
        env2 = ServiceEnv(tmp_path, clock_start=env.clock.now())
        records = env2.service.log.records()
        config_recs = [r for r in records if r.kind == "camera_config"]
        assert len(config_recs) == 1


class TestCameraMutations:
    def test_update_logged_and_replayable(self, tmp_path):
        env = ServiceEnv(tmp_path)
        env.service.update_camera("cam1", conf_threshold=0.5)
        replayed = replay(env.service.log.records(), env.service.params)
        assert replayed.cameras["cam1"]["conf_threshold"] == 0.5

    def test_threshold_change_affects_positivity(self, tmp_path):
        env = ServiceEnv(tmp_path, conf=0.6)
        env.service.update_camera("cam1", conf_threshold=0.7)
        env.step_frames(5)  # latest frame (5) carries a scripted detection
        # Detections still happen (0.6 >= conf_floor 0.298) but observations
        # are negative because 0.6 < camera threshold 0.7.
        latest = env.service.latest_view("cam1")
        assert latest["detection_count"] == 1
        assert latest["positive"] is False
        assert env.service.active_alerts_view() == []
