import pytest

from consentchain.vault import (
    AuthFailure,
    CiphertextEnvelope,
    EmptyField,
    SubjectErased,
    Unauthorized,
    UnknownSubject,
    Vault,
    derive_master_key,
)

from conftest import PII_FIXTURES

FIX = PII_FIXTURES["alpha"]


@pytest.fixture
def vault(make_vault):
    return make_vault()


@pytest.fixture
def subject(vault):
    return vault.subject_key_for(FIX["national_id"])


class TestSealAndOpen:
    def test_round_trip(self, vault, subject):
        envelopes = vault.seal_pii(subject, dict(FIX))
        assert vault.open_pii("owner", subject, envelopes) == FIX

    def test_fresh_nonces_per_seal(self, vault, subject):
        first = vault.seal_pii(subject, dict(FIX))
        second = vault.seal_pii(subject, dict(FIX))
        assert first["phone"].nonce != second["phone"].nonce
        assert first["phone"].ciphertext != second["phone"].ciphertext
        assert vault.open_pii("owner", subject, second) == FIX

    def test_empty_field_rejected(self, vault, subject):
        with pytest.raises(EmptyField):
            vault.seal_pii(subject, {**FIX, "phone": ""})

    def test_unauthorized_role(self, vault, subject):
        envelopes = vault.seal_pii(subject, dict(FIX))
        with pytest.raises(Unauthorized):
            vault.open_pii("subject", subject, envelopes)

    def test_every_single_bit_flip_is_detected(self, vault, subject):
        envelopes = vault.seal_pii(subject, dict(FIX))
        env = envelopes["national_id"]
        tampered_fields = (
            [("ciphertext", i) for i in range(len(env.ciphertext))]
            + [("auth_tag", i) for i in range(16)]
            + [("nonce", i) for i in range(12)]
        )
        for field_name, position in tampered_fields:
            original = getattr(env, field_name)
            mutated = bytes(
                b ^ 0x01 if i == position else b for i, b in enumerate(original)
            )
            broken = CiphertextEnvelope(
                field_tag=env.field_tag,
                nonce=mutated if field_name == "nonce" else env.nonce,
                ciphertext=mutated if field_name == "ciphertext" else env.ciphertext,
                auth_tag=mutated if field_name == "auth_tag" else env.auth_tag,
            )
            with pytest.raises(AuthFailure):
                vault.open_pii("owner", subject, {"national_id": broken})

    def test_no_plaintext_at_rest(self, vault, subject, tmp_path):
        vault.seal_pii(subject, dict(FIX))
        for path in (tmp_path / "vault").iterdir():
            data = path.read_bytes()
            for value in FIX.values():
                assert value.encode() not in data


class TestErasure:
    def test_erase_then_open_fails(self, vault, subject):
        envelopes = vault.seal_pii(subject, dict(FIX))
        vault.erase_subject(subject)
        with pytest.raises(SubjectErased):
            vault.open_pii("owner", subject, envelopes)

    def test_seal_after_erase_refused(self, vault, subject):
        vault.seal_pii(subject, dict(FIX))
        vault.erase_subject(subject)
        with pytest.raises(SubjectErased):
            vault.seal_pii(subject, dict(FIX))

    def test_idempotent_proofs(self, vault, subject):
        vault.seal_pii(subject, dict(FIX))
        first = vault.erase_subject(subject)
        second = vault.erase_subject(subject)
        assert first == second

    def test_unknown_subject(self, vault):
        with pytest.raises(UnknownSubject):
            vault.erase_subject(b"\x00" * 32)

    def test_no_key_material_survives_on_disk(self, vault, subject, tmp_path):
        vault.seal_pii(subject, dict(FIX))
        entry = vault._entries[subject]
        wrapped = entry.data_key_wrapped
        keys_file = tmp_path / "vault" / "keys.bin"
        assert wrapped in keys_file.read_bytes()
        vault.erase_subject(subject)
        for path in (tmp_path / "vault").iterdir():
            data = path.read_bytes()
            assert wrapped not in data
            # no 16-byte window of the wrapped key appears anywhere either
            for i in range(len(wrapped) - 16):
                assert wrapped[i : i + 16] not in data

    def test_other_subjects_unaffected(self, vault):
        a = vault.subject_key_for(PII_FIXTURES["alpha"]["national_id"])
        b = vault.subject_key_for(PII_FIXTURES["bravo"]["national_id"])
        vault.seal_pii(a, dict(PII_FIXTURES["alpha"]))
        env_b = vault.seal_pii(b, dict(PII_FIXTURES["bravo"]))
        vault.erase_subject(a)
        assert vault.open_pii("owner", b, env_b) == PII_FIXTURES["bravo"]


class TestSubjectKeys:
    def test_deterministic_per_salt(self, vault):
        assert vault.subject_key_for("123") == vault.subject_key_for("123")

    def test_different_secrets_different_keys(self, make_vault):
        a = make_vault(secret=b"secret-a", subdir="va")
        b = make_vault(secret=b"secret-b", subdir="vb")
        assert a.subject_key_for("123") != b.subject_key_for("123")

    def test_collision_scan(self, vault):
        keys = {vault.subject_key_for(f"{n:011d}") for n in range(10_000)}
        assert len(keys) == 10_000


class TestPersistence:
    def test_reload_preserves_entries_and_erasures(self, tmp_path, clock):
        master = derive_master_key(b"reload-secret")
        vault = Vault(tmp_path / "v", master, clock=clock)
        a = vault.subject_key_for("11111111111")
        b = vault.subject_key_for("22222222222")
        env_a = vault.seal_pii(a, dict(FIX))
        vault.seal_pii(b, dict(FIX))
        vault.erase_subject(b)

        reopened = Vault(tmp_path / "v", master, clock=clock)
        assert reopened.open_pii("owner", a, env_a) == FIX
        assert reopened.is_erased(b)
        with pytest.raises(SubjectErased):
            reopened.seal_pii(b, dict(FIX))
