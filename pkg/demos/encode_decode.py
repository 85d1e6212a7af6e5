"""
Encoding and decoding one generation
====================================

A source message is cut into K packets of L symbols. Each coded packet is a
random linear combination of them; the coefficients are regenerated from a
32-bit seed carried alongside, so the receiver never needs the vector itself.
"""

from fogrlnc import Decoder, FieldSpec, encode, segment
from fogrlnc.facility import derive_seed

F = FieldSpec(8)
K, L = 4, 16
message = b"sensor data from a connected vehicle, 64 bytes long..........."
gen = segment(message, K, L, F, message_id=0)
print("source packets:\n", gen.packets)

# Seeds come from the facility's hash of (station, message, index).
dec = Decoder(K, L, F, message_id=0)
j = 1
while not dec.complete:
    pkt = encode(gen, derive_seed(station_id=42, message_id=0, j=j))
    print(f"packet {j}: seed {pkt.seed:#010x}, innovative={dec.ingest(pkt)}, rank={dec.rank}")
    j += 1
print("recovered:", bytes(dec.recover().ravel())[: len(message)] == message)

# Why not just count seeds up? xorshift is linear over GF(2) and field
# addition is XOR, so the vector of seed a^b^c is the sum of the vectors of
# a, b and c. 1000 ^ 1001 ^ 1002 == 1003, hence:
dec = Decoder(K, L, F)
for seed in (1000, 1001, 1002, 1003):
    print(f"seed {seed}: innovative={dec.ingest(encode(gen, seed))}")
