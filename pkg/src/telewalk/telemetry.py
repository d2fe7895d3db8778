"""Telemetry: JSON-lines tick records and episode summaries.

One header line (schema version + config echo) followed by one record per
control tick, SI units.  Records are plain JSON objects with a stable key
order, so identical runs produce byte-identical files.

Tick record fields:
  t                       tick time [s]
  domain                  "dsp" | "ssp_left" | "ssp_right"
  step_k                  reference step counter
  pilot_com_x/_y          pilot CoM along/across the interface [m]
  pilot_contact_l/_r      pilot contact flags
  hwr_x, hwr_xdot         reference CoM state relative to stance foot [m, m/s]
  hwr_u                   pending step length [m]
  hwr_pre_x, hwr_pre_xdot predicted pre-impact state [m, m/s]
  t_ssp_est, t_dsp_est    online duration estimates [s]
  period_est              smoothed touch-down interval [s]
  fit_converged, z_cl_est swing-profile fit status / clearance estimate
  com_*, vel_*            robot CoM position/velocity [m, m/s]
  roll, pitch, yaw        robot attitude [rad]
  dcm_h_norm, dcm_r_norm  height-normalized divergent components
  dcm_err_norm            their difference
  cop_x, cop_y            center of pressure [m] (null while airborne-ish)
  grfs                    {contact: [fx, fy, fz]} for active contacts [N]
  qp_status/_iters/_kkt   force-distribution diagnostics
  qp_fallback             true when the even-split fallback engaged
  foot_l, foot_r          ankle positions [m]
  target_foot_x/_y        swing foot target (null in DSP) [m]
  com_des_x/_y, vel_des_x/_y  tracked CoM reference [m, m/s]
  tau_left, tau_right     commanded joint torques after blending [N m]
  haptic_x, haptic_y      pilot feedback forces [N]
  events                  list of event objects for this tick
"""

from __future__ import annotations

import json
from typing import Optional

SCHEMA_VERSION = 1


class TelemetryWriter:
    """Append-only JSON-lines sink."""

    def __init__(self, path):
        self._fh = open(path, "w")
        self._wrote_header = False

    def write_header(self, config: dict) -> None:
        self._emit({"type": "header", "schema_version": SCHEMA_VERSION, "config": config})
        self._wrote_header = True

    def write_tick(self, record: dict) -> None:
        if not self._wrote_header:
            raise RuntimeError("header must be written before tick records")
        self._emit(record)

    def _emit(self, obj: dict) -> None:
        self._fh.write(json.dumps(obj, separators=(",", ":"), allow_nan=False))
        self._fh.write("\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class ListSink:
    """In-memory sink with the TelemetryWriter interface (tests, bridge)."""

    def __init__(self):
        self.header: Optional[dict] = None
        self.records: list = []

    def write_header(self, config: dict) -> None:
        self.header = {"type": "header", "schema_version": SCHEMA_VERSION, "config": config}

    def write_tick(self, record: dict) -> None:
        self.records.append(record)

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def load_telemetry(path):
    """(header, tick records) from a JSON-lines telemetry file."""
    header = None
    ticks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if obj.get("type") == "header":
                header = obj
            else:
                ticks.append(obj)
    return header, ticks


def write_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
