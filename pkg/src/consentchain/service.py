"""HTTP/JSON boundary tying ledger, contract, vault, and identity together.

Request bodies are parsed by hand (no schema models) so every failure
maps to the documented {error, detail} shape and status code. All ledger
mutations funnel through the node's single writer; handlers run the
blocking work in a threadpool so reads stay responsive while a mutation
is in flight.

Access log lines carry the route path only — never the query string —
so a lookup like /verify?national_id=... cannot leak PII into logs.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import logging
import re
import secrets
import sqlite3
import threading
import time
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from . import contract as sc
from . import identity as ident
from . import vault as vaultmod
from .clock import Clock, WallClock
from .contract import Address, PURPOSES
from .etl import CorruptChain, build_stats
from .gas import GasSchedule
from .identity import IdGenerator, LogOnlySender, OtpService, TestInboxSender
from .ledger import EventName, topic_address
from .node import Node
from .vault import Vault, derive_master_key

logger = logging.getLogger("consentchain.service")

MASTER_SECRET_ENV = "CONSENTCHAIN_MASTER_SECRET"
SESSION_TTL_DEFAULT = 3600


class ApiError(Exception):
    def __init__(self, status: int, error: str, detail: str = ""):
        super().__init__(f"{status} {error}: {detail}")
        self.status = status
        self.error = error
        self.detail = detail


def _snake(exc: Exception) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", "_", type(exc).__name__).lower()


# domain error -> (status, error name); detail comes from the exception text
_ERROR_STATUS = {
    ident.InvalidPhone: 400,
    ident.RateLimited: 429,
    ident.UnknownChallenge: 401,
    ident.Expired: 401,
    ident.Exhausted: 401,
    ident.WrongCode: 401,
    ident.EmptyId: 400,
    sc.EmptyPurposes: 400,
    sc.InvalidPurpose: 400,
    sc.MissingEnvelopes: 400,
    sc.NoSuchRecord: 404,
    sc.AlreadyWithdrawn: 409,
    sc.ConsentInvalid: 403,
    sc.Unauthorized: 403,
    vaultmod.SubjectErased: 409,
    vaultmod.EmptyField: 400,
}


def _domain_error(exc: Exception) -> ApiError:
    for cls, status in _ERROR_STATUS.items():
        if isinstance(exc, cls):
            return ApiError(status, _snake(exc), str(exc))
    raise exc


@dataclass
class ServiceConfig:
    chain_path: Path
    vault_dir: Path
    schedule: GasSchedule
    master_secret: str
    db_path: str = ":memory:"
    otp_inbox: Optional[Path] = None  # None -> log-only sender
    staff_keys: frozenset = frozenset()
    admin_keys: frozenset = frozenset()
    agent_keys: frozenset = frozenset()
    session_ttl: int = SESSION_TTL_DEFAULT
    webui_dir: Optional[Path] = None
    clock: Optional[Clock] = None


def load_config_file(path: Path, chain_path: Path, vault_dir: Path, schedule: GasSchedule,
                     master_secret: str) -> ServiceConfig:
    """Build a ServiceConfig from the JSON config file next to the CLI flags."""
    path = Path(path)
    raw = json.loads(path.read_text())
    base = path.parent

    def resolve(key):
        return (base / raw[key]).resolve() if key in raw else None

    return ServiceConfig(
        chain_path=chain_path,
        vault_dir=vault_dir,
        schedule=schedule,
        master_secret=master_secret,
        db_path=str(resolve("db") or ":memory:"),
        otp_inbox=resolve("otp_inbox"),
        staff_keys=frozenset(raw.get("staff_keys", [])),
        admin_keys=frozenset(raw.get("admin_keys", [])),
        agent_keys=frozenset(raw.get("agent_keys", [])),
        session_ttl=int(raw.get("session_ttl", SESSION_TTL_DEFAULT)),
        webui_dir=resolve("webui_dir"),
    )


@dataclass(frozen=True)
class Principal:
    role: str  # subject | staff | admin | agent
    phone: Optional[str] = None


class App:
    """All mutable service state; the FastAPI instance delegates here."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.clock = config.clock or WallClock()
        master = derive_master_key(config.master_secret.encode())
        self.vault = Vault(config.vault_dir, master, clock=self.clock)
        self.ids = IdGenerator(hmac.new(master, b"pseudonym-id-key", hashlib.sha256).digest())
        self.owner = Address(hmac.new(master, b"owner-address", hashlib.sha256).digest()[:20])
        self.node = Node(
            config.chain_path, config.schedule, self.ids, self.owner, clock=self.clock
        )
        self.db = sqlite3.connect(config.db_path, check_same_thread=False)
        self._db_lock = threading.Lock()
        with self.db:
            self.db.execute(
                "CREATE TABLE IF NOT EXISTS sessions ("
                " token TEXT PRIMARY KEY, phone TEXT NOT NULL,"
                " role TEXT NOT NULL, expires_at INTEGER NOT NULL)"
            )
            self.db.execute(
                "CREATE TABLE IF NOT EXISTS directory ("
                " phone TEXT PRIMARY KEY, subject_key BLOB NOT NULL)"
            )
        sender = TestInboxSender(config.otp_inbox) if config.otp_inbox else LogOnlySender()
        self.otp = OtpService(self.db, sender, clock=self.clock)
        self.access_log: list = []

    # -- sessions and auth ---------------------------------------------

    def mint_session(self, phone: str) -> dict:
        token = secrets.token_hex(32)
        expires_at = self.clock.now() + self.config.session_ttl
        with self._db_lock, self.db:
            self.db.execute(
                "INSERT INTO sessions VALUES (?, ?, 'subject', ?)", (token, phone, expires_at)
            )
        return {"token": token, "role": "subject", "expires_at": expires_at}

    def authenticate(self, request: Request) -> Optional[Principal]:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer "):
            return None
        token = header.removeprefix("Bearer ")
        cfg = self.config
        if token in cfg.staff_keys:
            return Principal("staff")
        if token in cfg.admin_keys:
            return Principal("admin")
        if token in cfg.agent_keys:
            return Principal("agent")
        with self._db_lock:
            row = self.db.execute(
                "SELECT phone, expires_at FROM sessions WHERE token = ?", (token,)
            ).fetchone()
        if row is None:
            return None
        phone, expires_at = row
        if self.clock.now() >= expires_at:
            return None
        return Principal("subject", phone=phone)

    # -- subject directory ---------------------------------------------

    def remember_subject(self, phone: str, subject_key: bytes) -> None:
        with self._db_lock, self.db:
            self.db.execute(
                "INSERT OR REPLACE INTO directory VALUES (?, ?)", (phone, subject_key)
            )

    def subject_key_for_phone(self, phone: str) -> Optional[bytes]:
        with self._db_lock:
            row = self.db.execute(
                "SELECT subject_key FROM directory WHERE phone = ?", (phone,)
            ).fetchone()
        return row[0] if row else None

    # -- views ---------------------------------------------------------

    def consent_view(self, record: sc.ConsentRecord, record_index: int) -> dict:
        withdrawn = self.node.chain.get_events(
            EventName.ConsentWithdrawn,
            indexed_field_equals=("patient", topic_address(record.patient.value)),
        )
        import_index = record_index.to_bytes(8, "big")
        withdrawn_at = max(
            (ev.timestamp for ev in withdrawn if ev.data("record_index") == import_index),
            default=None,
        )
        return {
            "record_index": record_index,
            "purposes": dict(record.status),
            "given_at": record.timestamp,
            "withdrawn_at": withdrawn_at,
            "study_id": record.study_id,
            "profile": record.profile,
        }


def require_role(principal: Optional[Principal], *allowed: str) -> Principal:
    if principal is None:
        raise ApiError(401, "unauthenticated", "missing or invalid credential")
    if principal.role not in allowed:
        raise ApiError(403, "forbidden", f"role {principal.role} not permitted")
    return principal


async def _body_of(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise ApiError(400, "invalid_body", "request body must be a JSON object")
    if not isinstance(body, dict):
        raise ApiError(400, "invalid_body", "request body must be a JSON object")
    return body


def _require_str(body: dict, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str) or not value:
        raise ApiError(400, "missing_field", key)
    return value


def _require_purposes(body: dict) -> tuple:
    value = body.get("purposes")
    if not isinstance(value, list):
        raise ApiError(400, "missing_field", "purposes")
    return tuple(value)


def create_app(config: ServiceConfig) -> FastAPI:
    state = App(config)
    app = FastAPI(title="consentchain", docs_url=None, redoc_url=None)
    app.state.service = state

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.error, "detail": exc.detail}
        )

    @app.middleware("http")
    async def access_log(request: Request, call_next):
        response = await call_next(request)
        gas = response.headers.get("x-gas-used", "-")
        line = f"{state.clock.now()}\t{request.method}\t{request.url.path}\t{response.status_code}\tgas={gas}"
        state.access_log.append(line)
        logger.info(line)
        return response

    # -- OTP flow (public) ---------------------------------------------

    @app.post("/otp")
    async def request_otp(request: Request):
        body = await _body_of(request)
        phone = _require_str(body, "phone")
        try:
            challenge_id = await run_in_threadpool(state.otp.request_otp, phone)
        except ident.IdentityError as exc:
            raise _domain_error(exc)
        return {"challenge_id": challenge_id}

    @app.post("/otp/verify")
    async def verify_otp(request: Request):
        body = await _body_of(request)
        challenge_id = _require_str(body, "challenge_id")
        code = _require_str(body, "code")
        try:
            phone = await run_in_threadpool(state.otp.verify_otp, challenge_id, code)
        except ident.IdentityError as exc:
            raise _domain_error(exc)
        return state.mint_session(phone)

    # -- consents ------------------------------------------------------

    def _create_consent(principal: Principal, body: dict) -> tuple:
        source = body.get("source", "digital")
        if source not in ("digital", "paper"):
            raise ApiError(400, "invalid_body", "source must be digital or paper")
        if source == "paper" and principal.role != "staff":
            raise ApiError(403, "forbidden", "paper-signed entry requires staff role")
        profile = body.get("profile", "full")
        if profile not in ("full", "minimal"):
            raise ApiError(400, "invalid_body", "profile must be full or minimal")
        purposes = _require_purposes(body)
        national_id = _require_str(body, "national_id")

        subject_key = state.vault.subject_key_for(national_id)
        envelopes = None
        phone = None
        if profile == "full":
            mother_name = _require_str(body, "mother_name")
            phone = body.get("phone") or principal.phone
            if not phone:
                raise ApiError(400, "missing_field", "phone")
            try:
                envelopes = state.vault.seal_pii(
                    subject_key,
                    {"mother_name": mother_name, "national_id": national_id, "phone": phone},
                )
            except vaultmod.VaultError as exc:
                raise _domain_error(exc)
        try:
            record_index, receipt, block = state.node.submit_consent(
                state.owner, subject_key, purposes, envelopes, profile
            )
        except sc.ContractError as exc:
            raise _domain_error(exc)
        directory_phone = principal.phone or phone
        if directory_phone:
            state.remember_subject(directory_phone, subject_key)
        return record_index, receipt, block

    @app.post("/consents", status_code=201)
    async def create_consent(request: Request, response: Response):
        principal = require_role(state.authenticate(request), "subject", "staff")
        body = await _body_of(request)
        record_index, receipt, block = await run_in_threadpool(
            _create_consent, principal, body
        )
        response.headers["x-gas-used"] = str(receipt.gas_used)
        return {
            "record_index": record_index,
            "gas_used": receipt.gas_used,
            "block_index": block.index,
        }

    @app.get("/consents")
    async def list_consents(request: Request):
        principal = require_role(state.authenticate(request), "subject")

        def read() -> dict:
            subject_key = state.subject_key_for_phone(principal.phone)
            if subject_key is None:
                return {"records": []}
            records, _ = state.node.query_consent(state.owner, subject_key)
            return {"records": [state.consent_view(r, i) for i, r in enumerate(records)]}

        return await run_in_threadpool(read)

    @app.get("/verify")
    async def verify_consent(request: Request):
        require_role(state.authenticate(request), "staff")
        national_id = request.query_params.get("national_id")
        if not national_id:
            raise ApiError(400, "missing_field", "national_id")

        def read() -> dict:
            subject_key = state.vault.subject_key_for(national_id)
            summary = state.node.contract.consent_summary(subject_key)
            records, _ = state.node.query_consent(state.owner, subject_key)
            summary["records"] = [state.consent_view(r, i) for i, r in enumerate(records)]
            return summary

        return await run_in_threadpool(read)

    def _withdraw(principal: Principal, record_index: int, body: dict) -> tuple:
        purposes = _require_purposes(body)
        if principal.role == "staff":
            # staff-attested withdrawal on behalf of a paper-consent subject
            national_id = _require_str(body, "national_id")
            subject_key = state.vault.subject_key_for(national_id)
        else:
            subject_key = state.subject_key_for_phone(principal.phone)
            if subject_key is None:
                raise ApiError(404, "no_such_record", "no consents for this session")
        try:
            receipt, block = state.node.withdraw_consent(
                state.owner, subject_key, record_index, purposes
            )
        except sc.ContractError as exc:
            raise _domain_error(exc)
        erasure = False
        if state.node.contract.all_revoked(subject_key) and state.vault.has_entry(subject_key):
            state.vault.erase_subject(subject_key)  # "promptly deleted", before we respond
            erasure = True
        records, _ = state.node.query_consent(state.owner, subject_key)
        view = state.consent_view(records[record_index], record_index)
        view["erasure"] = erasure
        return view, receipt

    @app.post("/consents/{record_index}/withdraw")
    async def withdraw_consent(record_index: int, request: Request, response: Response):
        principal = require_role(state.authenticate(request), "subject", "staff")
        body = await _body_of(request)
        view, receipt = await run_in_threadpool(_withdraw, principal, record_index, body)
        response.headers["x-gas-used"] = str(receipt.gas_used)
        view["gas_used"] = receipt.gas_used
        return view

    # -- study ids -----------------------------------------------------

    @app.post("/study-ids")
    async def create_study_id(request: Request, response: Response):
        require_role(state.authenticate(request), "staff")
        body = await _body_of(request)
        national_id = _require_str(body, "national_id")
        baby_number = body.get("baby_number")
        if not isinstance(baby_number, int) or baby_number < 1:
            raise ApiError(400, "missing_field", "baby_number")

        def mint() -> tuple:
            subject_key = state.vault.subject_key_for(national_id)
            mother_id = state.ids.gen_mother_id(subject_key)
            baby_id = IdGenerator.format_baby_id(baby_number)
            try:
                return state.node.create_study_id(state.owner, subject_key, mother_id, baby_id)
            except sc.ContractError as exc:
                raise _domain_error(exc)

        sid, receipt, block, created = await run_in_threadpool(mint)
        response.status_code = 201 if created else 200
        response.headers["x-gas-used"] = str(receipt.gas_used)
        return {"study_id": sid.value, "created": created, "gas_used": receipt.gas_used}

    # -- media gate ----------------------------------------------------

    @app.get("/media-gate")
    async def media_gate(request: Request):
        require_role(state.authenticate(request), "agent")
        study_id = request.query_params.get("study_id")
        if not study_id:
            raise ApiError(400, "missing_field", "study_id")
        allowed = state.node.contract.study_id_allows_media(study_id)
        if allowed is None:
            raise ApiError(404, "unknown_study_id", study_id)
        return {"allowed": allowed, "checked_at": state.clock.now()}

    # -- statistics ----------------------------------------------------

    @app.get("/stats")
    async def stats(request: Request):
        require_role(state.authenticate(request), "staff", "admin")
        date_from = request.query_params.get("from", "1970-01-01")
        date_to = request.query_params.get(
            "to", time.strftime("%Y-%m-%d", time.gmtime(state.clock.now()))
        )
        try:
            result = await run_in_threadpool(
                build_stats, state.node.chain, (date_from, date_to)
            )
        except CorruptChain as exc:
            raise ApiError(500, "corrupt_chain", str(exc))
        except ValueError as exc:
            raise ApiError(400, "invalid_body", str(exc))
        return result.to_json_dict()

    # -- provider administration ---------------------------------------

    @app.post("/providers")
    async def set_provider(request: Request, response: Response):
        require_role(state.authenticate(request), "admin")
        body = await _body_of(request)
        address_hex = _require_str(body, "address")
        enabled = body.get("enabled")
        if not isinstance(enabled, bool):
            raise ApiError(400, "missing_field", "enabled")
        try:
            provider = Address.from_hex(address_hex)
        except ValueError:
            raise ApiError(400, "invalid_body", "address must be 20 bytes of hex")
        receipt, block = await run_in_threadpool(
            state.node.set_authorized_provider, state.owner, provider, enabled
        )
        response.headers["x-gas-used"] = str(receipt.gas_used)
        return {"address": str(provider), "enabled": enabled, "gas_used": receipt.gas_used}

    if config.webui_dir is not None and Path(config.webui_dir).is_dir():
        app.mount("/app", StaticFiles(directory=config.webui_dir, html=True), name="webui")

    return app


def poll_media_gate(
    base_url: str,
    study_id: str,
    agent_key: str,
    *,
    interval: float = 5.0,
    count: Optional[int] = None,
    emit=print,
) -> None:
    """Upload-gate polling stub: prints allow/deny until interrupted.

    Stands in for the external video uploader, which must re-check consent
    before every upload batch.
    """
    seen = 0
    while count is None or seen < count:
        req = urllib.request.Request(
            f"{base_url.rstrip('/')}/media-gate?study_id={study_id}",
            headers={"Authorization": f"Bearer {agent_key}"},
        )
        try:
            with urllib.request.urlopen(req) as resp:
                payload = json.loads(resp.read())
                verdict = "allow" if payload.get("allowed") else "deny"
        except urllib.error.HTTPError as exc:
            verdict = f"error {exc.code}"
        emit(f"{study_id}\t{verdict}")
        seen += 1
        if count is None or seen < count:
            time.sleep(interval)
