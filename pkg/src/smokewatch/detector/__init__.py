"""Pluggable detector boundary: detect() contract, wire protocol, post-processing."""

from .contract import (
    DEFAULT_CONF_FLOOR,
    DEFAULT_NMS_IOU,
    BackendError,
    DetectorBackend,
    DetectorConfig,
    ExclusionMask,
    ProtocolError,
    RawInference,
    postprocess,
)
from .backends import ExternalBackend, MockBackend, build_backend
from .wire import (
    InferenceRequest,
    decode_request,
    decode_response,
    encode_request,
    encode_request_payload,
    encode_response,
)

__all__ = [
    "DEFAULT_CONF_FLOOR",
    "DEFAULT_NMS_IOU",
    "BackendError",
    "DetectorBackend",
    "DetectorConfig",
    "ExclusionMask",
    "ProtocolError",
    "RawInference",
    "postprocess",
    "ExternalBackend",
    "MockBackend",
    "build_backend",
    "InferenceRequest",
    "decode_request",
    "decode_response",
    "encode_request",
    "encode_request_payload",
    "encode_response",
]
