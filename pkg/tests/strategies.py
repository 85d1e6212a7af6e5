"""Hypothesis strategies shared by the wire and acceptance tests."""

import hypothesis.strategies as st

from fogrlnc import wire

u8 = st.integers(0, 2**8 - 1)
u32 = st.integers(0, 2**32 - 1)


@st.composite
def cams(draw, max_frame=wire.MAX_FRAME):
    """Any valid RlncCam that fits in ``max_frame`` bytes."""
    tlvs = draw(st.lists(st.builds(wire.Tlv, u8, st.binary(max_size=40)), max_size=4))
    room = max_frame - wire.frame_length(0, tlvs)
    return wire.RlncCam(
        protocol_version=draw(u8),
        cam_id=draw(u32),
        generation_timestamp=draw(st.integers(0, 2**64 - 1)),
        station_id=draw(u32),
        station_type=draw(st.sampled_from(wire.StationType)),
        latitude=draw(st.integers(-wire.MAX_LATITUDE, wire.MAX_LATITUDE)),
        longitude=draw(st.integers(-wire.MAX_LONGITUDE, wire.MAX_LONGITUDE)),
        elevation=draw(st.integers(-(2**31) + 1, 2**31 - 1)),
        heading=draw(st.integers(0, wire.MAX_HEADING)),
        source_message_id=draw(u32),
        field_size_code=draw(st.integers(0, 7)),
        coding_seed=draw(u32),
        coded_payload=draw(st.binary(max_size=min(room, 300))),
        optional_attributes=tuple(tlvs),
    )
