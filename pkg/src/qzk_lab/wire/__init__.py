"""
wire package - Frame codec, transports and transcript files.
"""

from .codec import Frame, decode_any, encode_header, encode_msg, encode_verdict
from .transcripts import load_transcript, save_transcript, verify_transcript
from .transport import InProcTransport, TcpTransport, serve_verifier

__all__ = [
    "Frame",
    "encode_msg",
    "encode_header",
    "encode_verdict",
    "decode_any",
    "InProcTransport",
    "TcpTransport",
    "serve_verifier",
    "save_transcript",
    "load_transcript",
    "verify_transcript",
]
