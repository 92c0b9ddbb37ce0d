"""Compact JWT (HS256 only) for service authentication.

Tokens carry {iss, exp} and are signed with a shared secret taken from the
SHELLTRIAGE_SECRET environment variable; the secret never appears in config
files or CLI arguments. Verification is strict: any malformed token, wrong
algorithm, bad signature, or expired claim raises AuthError.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import os
import time

from shelltriage.errors import AuthError

SECRET_ENV_VAR = "SHELLTRIAGE_SECRET"
DEFAULT_TTL_SECONDS = 3600
_HEADER = {"alg": "HS256", "typ": "JWT"}


def _b64url_encode(raw: bytes) -> str:
    return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")


def _b64url_decode(part: str) -> bytes:
    pad = -len(part) % 4
    try:
        return base64.urlsafe_b64decode(part + "=" * pad)
    except (ValueError, TypeError) as exc:
        raise AuthError("token is not valid base64url") from exc


def _json_segment(obj: dict) -> str:
    return _b64url_encode(
        json.dumps(obj, separators=(",", ":"), sort_keys=True).encode("utf-8")
    )


def secret_from_env() -> bytes:
    secret = os.environ.get(SECRET_ENV_VAR, "")
    if not secret:
        raise AuthError(f"{SECRET_ENV_VAR} is not set")
    return secret.encode("utf-8")


def sign_token(
    secret: bytes,
    issuer: str,
    ttl_seconds: int = DEFAULT_TTL_SECONDS,
    now: float | None = None,
) -> str:
    """Issue a compact HS256 token with iss and exp claims."""
    issued_at = time.time() if now is None else now
    claims = {"iss": issuer, "exp": int(issued_at) + int(ttl_seconds)}
    signing_input = f"{_json_segment(_HEADER)}.{_json_segment(claims)}"
    sig = hmac.new(secret, signing_input.encode("ascii"), hashlib.sha256).digest()
    return f"{signing_input}.{_b64url_encode(sig)}"


def verify_token(
    secret: bytes,
    token: str,
    expected_issuer: str | None = None,
    now: float | None = None,
) -> dict:
    """Validate signature, algorithm, expiry, and (optionally) issuer.

    Returns the claims dict on success; raises AuthError otherwise.
    """
    parts = token.split(".")
    if len(parts) != 3:
        raise AuthError("token must have three dot-separated segments")
    signing_input = f"{parts[0]}.{parts[1]}"
    expected = hmac.new(secret, signing_input.encode("ascii"), hashlib.sha256).digest()
    if not hmac.compare_digest(expected, _b64url_decode(parts[2])):
        raise AuthError("signature mismatch")
    try:
        header = json.loads(_b64url_decode(parts[0]))
        claims = json.loads(_b64url_decode(parts[1]))
    except json.JSONDecodeError as exc:
        raise AuthError("token segments are not valid JSON") from exc
    if not isinstance(header, dict) or header.get("alg") != "HS256":
        raise AuthError("unsupported token algorithm")
    if not isinstance(claims, dict):
        raise AuthError("claims segment must be a JSON object")
    exp = claims.get("exp")
    if not isinstance(exp, (int, float)):
        raise AuthError("exp claim missing or not numeric")
    current = time.time() if now is None else now
    if current >= exp:
        raise AuthError("token expired")
    if expected_issuer is not None and claims.get("iss") != expected_issuer:
        raise AuthError("issuer mismatch")
    return claims
