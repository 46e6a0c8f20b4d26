"""
wire/transcripts.py - JSON-lines transcript files.

Line 1 is the header frame, then one frame per message, then the verdict frame
(absent for a session cut short). Each line is the JSON body of a wire frame.
"""

from __future__ import annotations

from pathlib import Path

from qzk_lab.core.errors import FormatError, ProtocolError
from qzk_lab.core.protocol import SessionHeader, Transcript, Verdict, replay_verdict
from qzk_lab.core.utils import write_atomic
from qzk_lab.wire.codec import (
    decode_any,
    encode_header,
    encode_msg,
    encode_verdict,
    frame_to_json,
    json_to_frame,
)


def dumps_transcript(transcript: Transcript) -> str:
    sid = transcript.header.session_id
    lines = [frame_to_json(encode_header(transcript.header))]
    lines += [frame_to_json(encode_msg(m)) for m in transcript.messages]
    if transcript.verdict is not None:
        lines.append(frame_to_json(encode_verdict(sid, transcript.verdict)))
    return "\n".join(lines) + "\n"


def loads_transcript(text: str) -> Transcript:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty transcript file")
    header = decode_any(json_to_frame(lines[0]))
    if not isinstance(header, SessionHeader):
        raise FormatError("transcript must start with a header frame")
    transcript = Transcript(header)
    for n, line in enumerate(lines[1:], start=2):
        item = decode_any(json_to_frame(line))
        if isinstance(item, SessionHeader):
            raise FormatError(f"line {n}: second header frame")
        if isinstance(item, Verdict):
            if n != len(lines):
                raise FormatError(f"line {n}: verdict before the end of the transcript")
            transcript.verdict = item
            break
        transcript.append(item)
    return transcript


def save_transcript(transcript: Transcript, path: Path) -> None:
    write_atomic(dumps_transcript(transcript), path)


def load_transcript(path: Path) -> Transcript:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read transcript {path}: {e}") from e
    return loads_transcript(text)


def verify_transcript(transcript: Transcript) -> bool:
    """True iff replaying the public messages reproduces the stored verdict."""
    if transcript.verdict is None:
        return False
    try:
        return replay_verdict(transcript).same_as(transcript.verdict)
    except ProtocolError:
        return False
