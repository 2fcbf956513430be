"""Exception hierarchy shared across the toolkit."""


class BitsalvageError(Exception):
    """Base class for all toolkit errors."""


class JpegError(BitsalvageError):
    """Base class for JPEG container / codec errors."""


class MissingSOI(JpegError):
    """Input does not begin with an SOI marker."""


class UnsupportedMode(JpegError):
    """Legal JPEG feature outside the baseline subset handled here."""


class TruncatedSegment(JpegError):
    """A marker segment claims more bytes than the stream holds."""


class CorruptThumbnail(JpegError):
    """Embedded thumbnail bytes fail to decode."""


class ScanDecodeError(JpegError):
    """Entropy-coded scan data could not be decoded (standard semantics: abort).

    ``kind`` is one of the failure-kind strings in :data:`FAILURE_KINDS`;
    ``bit_address`` counts bits from the start of the (unstuffed) scan data.
    """

    def __init__(self, kind, bit_address, detail=""):
        self.kind = kind
        self.bit_address = bit_address
        msg = f"{kind} at bit {bit_address}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


#: Failure kinds a scan decode can report.
INVALID_CODEWORD = "InvalidCodeword"
COEFFICIENT_OVERFLOW = "CoefficientOverflow"
UNEXPECTED_MARKER = "UnexpectedMarker"
BITSTREAM_EXHAUSTED = "BitstreamExhausted"

FAILURE_KINDS = (
    INVALID_CODEWORD,
    COEFFICIENT_OVERFLOW,
    UNEXPECTED_MARKER,
    BITSTREAM_EXHAUSTED,
)


class NoSync(BitsalvageError):
    """Two block sequences never re-synchronize."""


class CipherError(BitsalvageError):
    """Sector cipher misuse (bad lengths, bad key)."""
