"""
The RLNC-CAM frame
==================

A coded packet travels inside a CAM-like frame: kinematic header, optional
TLV attributes, then the RLNC container (message id, field code, seed and
payload). Integers are big-endian.
"""

from fogrlnc import wire

msg = wire.RlncCam(
    protocol_version=1,
    cam_id=17,
    generation_timestamp=1_700_000_000_000,
    station_id=42,
    station_type=wire.StationType.MOBILE,
    latitude=514545000,      # 51.4545 degrees in 0.1 microdegree
    longitude=-25879000,
    elevation=1200,          # cm
    heading=900,             # 90.0 degrees
    source_message_id=3,
    field_size_code=wire.field_size_code(256),
    coding_seed=0xC2B2AE35,
    coded_payload=b"\x01\x02\x03",
)
frame = wire.serialize(msg)
print(len(frame), "bytes:", frame.hex())
assert wire.parse(frame) == msg
print("fixed overhead:", wire.FIXED_OVERHEAD, "bytes")

try:
    wire.parse(frame[:20])
except wire.TruncationError as exc:
    print("truncated frame ->", exc)
