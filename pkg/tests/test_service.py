"""HTTP boundary: endpoint semantics, error mapping, and the authorization sweep."""

import json
import pathlib

import pytest

from consentchain.clock import CounterClock

from conftest import ADMIN_KEY, AGENT_KEY, PII_FIXTURES, STAFF_KEY

ALPHA = PII_FIXTURES["alpha"]
BRAVO = PII_FIXTURES["bravo"]

PROVIDER_HEX = "0x" + "ab" * 20


class TestOtpFlow:
    def test_malformed_phone_is_rejected(self, harness):
        r = harness.client.post("/otp", json={"phone": "12345"})
        assert r.status_code == 400
        assert r.json()["error"] == "invalid_phone"

    def test_fourth_request_in_window_is_rate_limited(self, harness):
        for _ in range(3):
            assert harness.client.post("/otp", json={"phone": ALPHA["phone"]}).status_code == 200
        r = harness.client.post("/otp", json={"phone": ALPHA["phone"]})
        assert r.status_code == 429
        assert r.json()["error"] == "rate_limited"

    def test_wrong_code_then_correct_one_succeeds(self, harness):
        r = harness.client.post("/otp", json={"phone": ALPHA["phone"]})
        challenge_id = r.json()["challenge_id"]
        r = harness.client.post(
            "/otp/verify", json={"challenge_id": challenge_id, "code": "999999"}
        )
        # six digits means a 1e-6 chance the guess is right; accept the miss
        if r.status_code == 200:
            pytest.skip("guessed the code")
        assert r.json()["error"] == "wrong_code"
        code = harness.last_code_for(ALPHA["phone"])
        r = harness.client.post("/otp/verify", json={"challenge_id": challenge_id, "code": code})
        assert r.status_code == 200
        assert r.json()["role"] == "subject"

    def test_expired_code_maps_to_401_expired(self, make_harness):
        clock = CounterClock()
        harness = make_harness(clock=clock)
        r = harness.client.post("/otp", json={"phone": ALPHA["phone"]})
        challenge_id = r.json()["challenge_id"]
        code = harness.last_code_for(ALPHA["phone"])
        clock.advance(301)
        r = harness.client.post("/otp/verify", json={"challenge_id": challenge_id, "code": code})
        assert r.status_code == 401
        assert r.json()["error"] == "expired"

    def test_unknown_challenge_maps_to_401(self, harness):
        r = harness.client.post(
            "/otp/verify", json={"challenge_id": "00" * 16, "code": "123456"}
        )
        assert r.status_code == 401
        assert r.json()["error"] == "unknown_challenge"

    def test_missing_fields_and_non_object_bodies(self, harness):
        assert harness.client.post("/otp", json={}).status_code == 400
        r = harness.client.post("/otp", content=b"[]", headers={"content-type": "application/json"})
        assert r.status_code == 400
        assert r.json()["error"] == "invalid_body"

    def test_expired_session_no_longer_authenticates(self, make_harness):
        clock = CounterClock()
        harness = make_harness(clock=clock)
        token = harness.subject_session(ALPHA)
        assert harness.client.get("/consents", headers=harness.auth(token)).status_code == 200
        clock.advance(harness.config.session_ttl + 1)
        assert harness.client.get("/consents", headers=harness.auth(token)).status_code == 401


class TestCreateConsent:
    def test_digital_full_registration(self, harness):
        token = harness.subject_session(ALPHA)
        r = harness.submit_consent(token, ALPHA)
        assert r.status_code == 201
        body = r.json()
        assert body["record_index"] == 0
        assert body["gas_used"] == 175719
        assert r.headers["x-gas-used"] == "175719"

    def test_second_registration_meters_warm(self, harness):
        token = harness.subject_session(ALPHA)
        harness.submit_consent(token, ALPHA)
        r = harness.submit_consent(token, ALPHA)
        assert r.json() == {"record_index": 1, "gas_used": 160719, "block_index": 2}

    def test_minimal_profile_needs_no_name_or_phone(self, harness):
        token = harness.subject_session(ALPHA)
        harness.submit_consent(token, ALPHA)  # warm the subject's bookkeeping slot
        r = harness.client.post(
            "/consents",
            headers=harness.auth(token),
            json={
                "purposes": ["research"],
                "profile": "minimal",
                "national_id": ALPHA["national_id"],
            },
        )
        assert r.status_code == 201
        assert r.json()["gas_used"] == 102437

    def test_full_profile_uses_session_phone_when_body_omits_it(self, harness):
        token = harness.subject_session(ALPHA)
        r = harness.client.post(
            "/consents",
            headers=harness.auth(token),
            json={
                "purposes": ["research"],
                "profile": "full",
                "national_id": ALPHA["national_id"],
                "mother_name": ALPHA["mother_name"],
            },
        )
        assert r.status_code == 201
        # the directory now maps the session phone, so reads work immediately
        r = harness.client.get("/consents", headers=harness.auth(token))
        assert len(r.json()["records"]) == 1

    def test_full_profile_without_mother_name_is_rejected(self, harness):
        token = harness.subject_session(ALPHA)
        r = harness.client.post(
            "/consents",
            headers=harness.auth(token),
            json={"purposes": ["research"], "profile": "full",
                  "national_id": ALPHA["national_id"]},
        )
        assert r.status_code == 400
        assert r.json() == {"error": "missing_field", "detail": "mother_name"}

    def test_unknown_purpose_and_empty_purposes(self, harness):
        token = harness.subject_session(ALPHA)
        r = harness.submit_consent(token, ALPHA, purposes=("marketing",))
        assert (r.status_code, r.json()["error"]) == (400, "invalid_purpose")
        r = harness.submit_consent(token, ALPHA, purposes=())
        assert (r.status_code, r.json()["error"]) == (400, "empty_purposes")

    def test_paper_source_requires_staff(self, harness):
        token = harness.subject_session(ALPHA)
        r = harness.submit_consent(token, ALPHA, source="paper")
        assert r.status_code == 403
        r = harness.submit_consent(STAFF_KEY, ALPHA, source="paper")
        assert r.status_code == 201

    def test_paper_entry_is_readable_by_the_subject_after_login(self, harness):
        # staff records a paper form; the mother later signs in by phone
        r = harness.submit_consent(STAFF_KEY, ALPHA, source="paper")
        assert r.status_code == 201
        token = harness.subject_session(ALPHA)
        records = harness.client.get("/consents", headers=harness.auth(token)).json()["records"]
        assert len(records) == 1
        assert records[0]["purposes"] == {"research": "granted", "education": "granted"}
        assert records[0]["withdrawn_at"] is None

    def test_invalid_source_value(self, harness):
        r = harness.submit_consent(STAFF_KEY, ALPHA, source="fax")
        assert r.status_code == 400


class TestWithdraw:
    def _register(self, harness, fix=ALPHA, purposes=("research", "education")):
        token = harness.subject_session(fix)
        assert harness.submit_consent(token, fix, purposes=purposes).status_code == 201
        return token

    def test_partial_withdrawal_keeps_other_purposes(self, harness):
        token = self._register(harness)
        r = harness.client.post(
            "/consents/0/withdraw", headers=harness.auth(token), json={"purposes": ["research"]}
        )
        assert r.status_code == 200
        view = r.json()
        assert view["purposes"] == {"research": "revoked", "education": "granted"}
        assert view["erasure"] is False
        assert view["gas_used"] == 37035
        assert view["withdrawn_at"] is not None

    def test_full_withdrawal_erases_the_vault_entry(self, harness):
        token = self._register(harness)
        r = harness.client.post(
            "/consents/0/withdraw",
            headers=harness.auth(token),
            json={"purposes": ["research", "education"]},
        )
        assert r.status_code == 200
        assert r.json()["erasure"] is True

    def test_erasure_waits_for_the_last_active_record(self, harness):
        token = self._register(harness)
        harness.submit_consent(token, ALPHA, purposes=("research",))
        r = harness.client.post(
            "/consents/0/withdraw",
            headers=harness.auth(token),
            json={"purposes": ["research", "education"]},
        )
        assert r.json()["erasure"] is False  # record 1 still grants research
        r = harness.client.post(
            "/consents/1/withdraw", headers=harness.auth(token), json={"purposes": ["research"]}
        )
        assert r.json()["erasure"] is True

    def test_registration_after_erasure_is_refused(self, harness):
        token = self._register(harness)
        harness.client.post(
            "/consents/0/withdraw",
            headers=harness.auth(token),
            json={"purposes": ["research", "education"]},
        )
        r = harness.submit_consent(token, ALPHA)
        assert r.status_code == 409
        assert r.json()["error"] == "subject_erased"

    def test_withdrawing_already_revoked_purposes_conflicts(self, harness):
        token = self._register(harness, purposes=("research",))
        harness.client.post(
            "/consents/0/withdraw", headers=harness.auth(token), json={"purposes": ["research"]}
        )
        r = harness.client.post(
            "/consents/0/withdraw", headers=harness.auth(token), json={"purposes": ["research"]}
        )
        assert r.status_code == 409
        assert r.json()["error"] == "already_withdrawn"

    def test_unknown_record_index_is_404(self, harness):
        token = self._register(harness)
        r = harness.client.post(
            "/consents/9/withdraw", headers=harness.auth(token), json={"purposes": ["research"]}
        )
        assert r.status_code == 404
        assert r.json()["error"] == "no_such_record"

    def test_staff_withdrawal_needs_the_national_id(self, harness):
        self._register(harness)
        r = harness.client.post(
            "/consents/0/withdraw", headers=harness.auth(STAFF_KEY),
            json={"purposes": ["research"]},
        )
        assert r.status_code == 400
        assert r.json()["detail"] == "national_id"
        r = harness.client.post(
            "/consents/0/withdraw", headers=harness.auth(STAFF_KEY),
            json={"purposes": ["research"], "national_id": ALPHA["national_id"]},
        )
        assert r.status_code == 200


class TestStudyIds:
    def _register(self, harness, fix=ALPHA):
        assert harness.submit_consent(STAFF_KEY, fix).status_code == 201

    def mint(self, harness, fix=ALPHA, baby_number=1):
        return harness.client.post(
            "/study-ids",
            headers=harness.auth(STAFF_KEY),
            json={"national_id": fix["national_id"], "baby_number": baby_number},
        )

    def test_first_mint_creates_then_repeat_is_idempotent(self, harness):
        self._register(harness)
        r = self.mint(harness)
        assert r.status_code == 201
        first = r.json()
        assert first["created"] is True
        assert first["gas_used"] == 52868
        assert first["study_id"].startswith("NBT-")

        r = self.mint(harness)
        assert r.status_code == 200
        assert r.json() == {"study_id": first["study_id"], "created": False, "gas_used": 0}

    def test_twins_get_distinct_ids(self, harness):
        self._register(harness)
        a = self.mint(harness, baby_number=1).json()["study_id"]
        b = self.mint(harness, baby_number=2).json()["study_id"]
        assert a != b

    def test_baby_number_must_be_a_positive_int(self, harness):
        self._register(harness)
        for bad in (0, -1, "1", None):
            r = harness.client.post(
                "/study-ids",
                headers=harness.auth(STAFF_KEY),
                json={"national_id": ALPHA["national_id"], "baby_number": bad},
            )
            assert r.status_code == 400, bad

    def test_mint_without_active_consent_is_forbidden(self, harness):
        r = self.mint(harness)  # never registered
        assert r.status_code == 403
        assert r.json()["error"] == "consent_invalid"


class TestMediaGate:
    def _minted(self, harness):
        assert harness.submit_consent(STAFF_KEY, ALPHA).status_code == 201
        r = harness.client.post(
            "/study-ids",
            headers=harness.auth(STAFF_KEY),
            json={"national_id": ALPHA["national_id"], "baby_number": 1},
        )
        return r.json()["study_id"]

    def test_gate_follows_consent_state(self, harness):
        sid = self._minted(harness)
        gate = lambda: harness.client.get(
            f"/media-gate?study_id={sid}", headers=harness.auth(AGENT_KEY)
        )
        assert gate().json()["allowed"] is True
        harness.client.post(
            "/consents/0/withdraw",
            headers=harness.auth(STAFF_KEY),
            json={"purposes": ["research", "education"], "national_id": ALPHA["national_id"]},
        )
        assert gate().json()["allowed"] is False

    def test_unknown_study_id_is_404(self, harness):
        r = harness.client.get(
            "/media-gate?study_id=NBT-NOPENOPE", headers=harness.auth(AGENT_KEY)
        )
        assert r.status_code == 404
        assert r.json()["error"] == "unknown_study_id"

    def test_missing_study_id_param(self, harness):
        r = harness.client.get("/media-gate", headers=harness.auth(AGENT_KEY))
        assert r.status_code == 400


class TestStatsAndProviders:
    def test_stats_totals_follow_registrations(self, harness):
        harness.submit_consent(STAFF_KEY, ALPHA)
        harness.submit_consent(STAFF_KEY, BRAVO, purposes=("research",))
        r = harness.client.get("/stats", headers=harness.auth(STAFF_KEY))
        assert r.status_code == 200
        body = r.json()
        assert body["totals"] == {"research": 2, "education": 1}
        assert set(body["weekday_distribution"]) == {str(k) for k in range(1, 8)}

    def test_admin_reads_stats_too(self, harness):
        assert harness.client.get("/stats", headers=harness.auth(ADMIN_KEY)).status_code == 200

    def test_provider_toggle_meters_cold_then_warm(self, harness):
        r = harness.client.post(
            "/providers", headers=harness.auth(ADMIN_KEY),
            json={"address": PROVIDER_HEX, "enabled": True},
        )
        assert r.status_code == 200
        assert r.json()["gas_used"] == 41000
        r = harness.client.post(
            "/providers", headers=harness.auth(ADMIN_KEY),
            json={"address": PROVIDER_HEX, "enabled": False},
        )
        assert r.json()["gas_used"] == 26000

    def test_provider_address_validation(self, harness):
        r = harness.client.post(
            "/providers", headers=harness.auth(ADMIN_KEY),
            json={"address": "0x1234", "enabled": True},
        )
        assert r.status_code == 400
        r = harness.client.post(
            "/providers", headers=harness.auth(ADMIN_KEY),
            json={"address": PROVIDER_HEX, "enabled": "yes"},
        )
        assert r.status_code == 400


class TestChainCoupling:
    def test_each_mutation_adds_exactly_one_block(self, harness):
        chain = harness.state.node.chain
        token = harness.subject_session(ALPHA)
        n0 = len(chain.blocks)
        assert harness.submit_consent(token, ALPHA).status_code == 201
        assert len(chain.blocks) == n0 + 1
        harness.client.post(
            "/study-ids", headers=harness.auth(STAFF_KEY),
            json={"national_id": ALPHA["national_id"], "baby_number": 1},
        )
        assert len(chain.blocks) == n0 + 2
        harness.client.post(
            "/consents/0/withdraw", headers=harness.auth(token),
            json={"purposes": ["research", "education"]},
        )
        assert len(chain.blocks) == n0 + 3

    def test_failed_requests_do_not_extend_the_chain(self, harness):
        chain = harness.state.node.chain
        token = harness.subject_session(ALPHA)
        n0 = len(chain.blocks)
        harness.submit_consent(token, ALPHA, purposes=("marketing",))  # 400
        harness.client.post(
            "/consents/3/withdraw", headers=harness.auth(token), json={"purposes": ["research"]}
        )  # 404
        assert len(chain.blocks) == n0

    def test_reads_never_extend_the_chain(self, harness):
        token = harness.subject_session(ALPHA)
        harness.submit_consent(token, ALPHA)
        chain = harness.state.node.chain
        n0 = len(chain.blocks)
        harness.client.get("/consents", headers=harness.auth(token))
        harness.client.get("/verify", headers=harness.auth(STAFF_KEY),
                           params={"national_id": ALPHA["national_id"]})
        harness.client.get("/stats", headers=harness.auth(STAFF_KEY))
        assert len(chain.blocks) == n0


class TestVerifyEndpoint:
    def test_staff_sees_summary_and_records(self, harness):
        harness.submit_consent(STAFF_KEY, ALPHA, purposes=("research",))
        r = harness.client.get(
            "/verify", headers=harness.auth(STAFF_KEY),
            params={"national_id": ALPHA["national_id"]},
        )
        body = r.json()
        assert body["active"] is True
        assert body["purposes"] == {"research": "granted", "education": "revoked"}
        assert len(body["records"]) == 1

    def test_never_registered_subject_reads_inactive(self, harness):
        r = harness.client.get(
            "/verify", headers=harness.auth(STAFF_KEY),
            params={"national_id": "99999999999"},
        )
        assert r.json()["active"] is False
        assert r.json()["records"] == []


class TestAccessLog:
    def test_lines_carry_path_but_never_the_query_string(self, harness):
        harness.submit_consent(STAFF_KEY, ALPHA)
        harness.client.get(
            "/verify", headers=harness.auth(STAFF_KEY),
            params={"national_id": ALPHA["national_id"]},
        )
        log = "\n".join(harness.state.access_log)
        assert "\t/verify\t" in log
        assert ALPHA["national_id"] not in log
        assert ALPHA["mother_name"] not in log

    def test_mutations_log_their_gas(self, harness):
        harness.submit_consent(STAFF_KEY, ALPHA)
        assert any(
            "\t/consents\t201\tgas=175719" in line for line in harness.state.access_log
        )


# -- authorization sweep -----------------------------------------------

MATRIX = json.loads(
    (pathlib.Path(__file__).parent / "data" / "authorization_matrix.json").read_text()
)

STATIC_TOKENS = {"staff": STAFF_KEY, "admin": ADMIN_KEY, "agent": AGENT_KEY}


def _token_for(harness, role):
    if role == "none":
        return None
    if role == "subject":
        return harness.subject_session(ALPHA)
    if role == "other_subject":
        return harness.subject_session(BRAVO)
    return STATIC_TOKENS[role]


def _sweep_call(harness, endpoint, role):
    """Run one matrix cell: set up the object state, then fire the request."""
    headers = {}
    token = _token_for(harness, role)
    if token:
        headers = harness.auth(token)

    consent_body = {
        "purposes": ["research", "education"],
        "profile": "full",
        "national_id": ALPHA["national_id"],
        "mother_name": ALPHA["mother_name"],
        "phone": ALPHA["phone"],
    }

    if endpoint == "POST /otp":
        return harness.client.post("/otp", headers=headers, json={"phone": ALPHA["phone"]})
    if endpoint == "POST /otp/verify":
        r = harness.client.post("/otp", json={"phone": BRAVO["phone"]})
        code = harness.last_code_for(BRAVO["phone"])
        return harness.client.post(
            "/otp/verify", headers=headers,
            json={"challenge_id": r.json()["challenge_id"], "code": code},
        )
    if endpoint == "POST /consents (digital)":
        return harness.client.post(
            "/consents", headers=headers, json={**consent_body, "source": "digital"}
        )
    if endpoint == "POST /consents (paper)":
        return harness.client.post(
            "/consents", headers=headers, json={**consent_body, "source": "paper"}
        )
    if endpoint == "GET /consents":
        return harness.client.get("/consents", headers=headers)
    if endpoint == "GET /verify":
        return harness.client.get(
            "/verify", headers=headers, params={"national_id": ALPHA["national_id"]}
        )
    if endpoint == "POST /consents/0/withdraw":
        # the record under withdrawal belongs to alpha
        alpha_token = harness.subject_session(ALPHA)
        assert harness.submit_consent(alpha_token, ALPHA).status_code == 201
        return harness.client.post(
            "/consents/0/withdraw", headers=headers,
            json={"purposes": ["research"], "national_id": ALPHA["national_id"]},
        )
    if endpoint == "POST /study-ids":
        assert harness.submit_consent(STAFF_KEY, ALPHA).status_code == 201
        return harness.client.post(
            "/study-ids", headers=headers,
            json={"national_id": ALPHA["national_id"], "baby_number": 1},
        )
    if endpoint == "GET /media-gate":
        assert harness.submit_consent(STAFF_KEY, ALPHA).status_code == 201
        sid = harness.client.post(
            "/study-ids", headers=harness.auth(STAFF_KEY),
            json={"national_id": ALPHA["national_id"], "baby_number": 1},
        ).json()["study_id"]
        return harness.client.get(f"/media-gate?study_id={sid}", headers=headers)
    if endpoint == "GET /stats":
        return harness.client.get("/stats", headers=headers)
    if endpoint == "POST /providers":
        return harness.client.post(
            "/providers", headers=headers, json={"address": PROVIDER_HEX, "enabled": True}
        )
    raise AssertionError(f"unmapped endpoint {endpoint}")


class TestAuthorizationMatrix:
    @pytest.mark.parametrize("endpoint", sorted(MATRIX["endpoints"]))
    def test_endpoint_matches_committed_matrix(self, endpoint, make_harness):
        deviations = []
        for role in MATRIX["roles"]:
            harness = make_harness()  # fresh state per cell; no coupling
            expected = MATRIX["endpoints"][endpoint][role]
            got = _sweep_call(harness, endpoint, role).status_code
            if got != expected:
                deviations.append(f"{endpoint} as {role}: expected {expected}, got {got}")
        assert deviations == []
