import pathlib

import pytest

from consentchain.clock import CounterClock
from consentchain.contract import Address
from consentchain.gas import load_profile
from consentchain.identity import IdGenerator
from consentchain.node import Node
from consentchain.service import ServiceConfig, create_app
from consentchain.vault import Vault, derive_master_key

# Synthetic PII used by every scenario. Privacy checks scan artifacts for
# these exact strings, so all tests must draw their test subjects from here.
PII_FIXTURES = {
    "alpha": {
        "mother_name": "Astrid Lindqvist",
        "national_id": "01019912345",
        "phone": "+4791000001",
    },
    "bravo": {
        "mother_name": "Beate Sørensen",
        "national_id": "02029923456",
        "phone": "+4791000002",
    },
    "carol": {
        "mother_name": "Cecilie Haugen",
        "national_id": "03039934567",
        "phone": "+4791000003",
    },
}

ALL_PII_STRINGS = [v for fix in PII_FIXTURES.values() for v in fix.values()]

STAFF_KEY = "staff-key-0001"
ADMIN_KEY = "admin-key-0001"
AGENT_KEY = "agent-key-0001"

ID_KEY = b"test-id-key-0123456789abcdef----"
OWNER = Address(b"\x01" * 20)
PROVIDER = Address(b"\x02" * 20)
OUTSIDER = Address(b"\x03" * 20)


@pytest.fixture(scope="session")
def schedule():
    return load_profile("newborntime-v1")


@pytest.fixture
def clock():
    return CounterClock()


@pytest.fixture
def ids():
    return IdGenerator(ID_KEY)


@pytest.fixture
def make_vault(tmp_path, clock):
    def _make(secret=b"vault-test-secret", subdir="vault"):
        return Vault(tmp_path / subdir, derive_master_key(secret), clock=clock)

    return _make


@pytest.fixture
def make_node(tmp_path, schedule, ids, clock):
    def _make(filename="chain.bin", *, persistent=True, bootstrap=True):
        path = tmp_path / filename if persistent else None
        return Node(path, schedule, ids, OWNER, clock=clock, bootstrap_genesis=bootstrap)

    return _make


class ServiceHarness:
    """One service instance plus the client-side choreography tests need."""

    def __init__(self, base_dir: pathlib.Path, schedule, clock=None):
        from fastapi.testclient import TestClient

        base_dir.mkdir(parents=True, exist_ok=True)
        self.dir = base_dir
        self.inbox = base_dir / "otp_inbox.txt"
        self.config = ServiceConfig(
            chain_path=base_dir / "chain.bin",
            vault_dir=base_dir / "vault",
            schedule=schedule,
            master_secret="harness-master-secret",
            otp_inbox=self.inbox,
            staff_keys=frozenset({STAFF_KEY}),
            admin_keys=frozenset({ADMIN_KEY}),
            agent_keys=frozenset({AGENT_KEY}),
            clock=clock or CounterClock(),
        )
        self.app = create_app(self.config)
        self.state = self.app.state.service
        self.client = TestClient(self.app)

    @staticmethod
    def auth(token: str) -> dict:
        return {"Authorization": f"Bearer {token}"}

    def last_code_for(self, phone: str) -> str:
        lines = [l for l in self.inbox.read_text().splitlines() if f"\t{phone}\t" in l]
        return lines[-1].split("\t")[2]

    def subject_session(self, fix: dict) -> str:
        r = self.client.post("/otp", json={"phone": fix["phone"]})
        assert r.status_code == 200, r.text
        challenge_id = r.json()["challenge_id"]
        code = self.last_code_for(fix["phone"])
        r = self.client.post("/otp/verify", json={"challenge_id": challenge_id, "code": code})
        assert r.status_code == 200, r.text
        return r.json()["token"]

    def submit_consent(self, token: str, fix: dict, purposes=("research", "education"),
                       profile="full", source="digital"):
        body = {
            "purposes": list(purposes),
            "profile": profile,
            "national_id": fix["national_id"],
            "source": source,
        }
        if profile == "full":
            body["mother_name"] = fix["mother_name"]
            body["phone"] = fix["phone"]
        return self.client.post("/consents", headers=self.auth(token), json=body)


@pytest.fixture
def make_harness(tmp_path, schedule):
    counter = [0]

    def _make(clock=None) -> ServiceHarness:
        counter[0] += 1
        return ServiceHarness(tmp_path / f"svc{counter[0]}", schedule, clock=clock)

    return _make


@pytest.fixture
def harness(make_harness):
    return make_harness()


# -- acceptance reporting ----------------------------------------------

# (criterion name, passed) appended by tests/test_acceptance.py; echoed as
# one line per criterion in the terminal summary, past output capture.
ACCEPTANCE_RESULTS: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}")
