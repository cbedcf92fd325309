"""
Key-configuration assembly, lint rules and corpus statistics.

Call-level metrics count every detected site, reachable or not (duplicates
across apps are counted on purpose). Reachability is reported separately,
and key assembly drops unreachable sites unless asked not to.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from loguru import logger

from .callgraph import EXCLUDED_OBFUSCATED, FIRST_PARTY, THIRD_PARTY
from .corpus import AppResult, CorpusManifest, PackageEntry, build_party_map
from .errors import EmptyCorpus
from .labels import SENSITIVE
from .sigdb import KEYSTORE_CATEGORIES, ApiCallSite
from .slicer import decode_purposes, purpose_label
from .smali_ir import MethodSignature

KEYSTORE_PROVIDERS = ("AndroidKeyStore", "AndroidKeyStoreBCWorkaround")
KEY_FACTORY_APIS = (
    "jca.KeyGenerator.getInstanceWithProvider",
    "jca.KeyPairGenerator.getInstanceWithProvider",
    "jca.Cipher.getInstanceWithProvider",
)
SOFTWARE_FACTORY_APIS = (
    "jca.KeyGenerator.getInstance",
    "jca.KeyPairGenerator.getInstance",
    "jca.KeyGenerator.getInstanceWithProvider",
    "jca.KeyPairGenerator.getInstanceWithProvider",
)

SETTER_FIELDS = {
    "kgps.setKeySize": "key_size",
    "kgps.setBlockModes": "block_modes",
    "kgps.setEncryptionPaddings": "encryption_paddings",
    "kgps.setSignaturePaddings": "signature_paddings",
    "kgps.setDigests": "digests",
    "kgps.setIsStrongBoxBacked": "strongbox",
    "kgps.setUserAuthenticationRequired": "auth_required",
    "kgps.setUserAuthenticationValidityDurationSeconds": "auth_validity_seconds",
    "kgps.setUserAuthenticationParameters": "auth_validity_seconds",
    "kgps.setRandomizedEncryptionRequired": "randomized_encryption",
    "kgps.setUserConfirmationRequired": "user_confirmation",
    "kgps.setUnlockedDeviceRequired": "unlocked_device_required",
    "kgps.setUserPresenceRequired": "user_presence_required",
    "kgps.setInvalidatedByBiometricEnrollment": "invalidated_by_biometric_enrollment",
}
VALIDITY_APIS = ("kgps.setUserAuthenticationValidityDurationSeconds", "kgps.setUserAuthenticationParameters")

AUTH_BUCKETS = ("per-use", "≤3 s", "5 s", "1 h", "other")

# Purposes each key algorithm can serve.
ALLOWED_PURPOSES = {
    "AES": {"ENCRYPT", "DECRYPT", "WRAP_KEY"},
    "3DES": {"ENCRYPT", "DECRYPT"},
    "HMAC": {"SIGN", "VERIFY"},
    "EC": {"SIGN", "VERIFY", "AGREE_KEY", "ATTEST_KEY"},
    "RSA": {"ENCRYPT", "DECRYPT", "SIGN", "VERIFY", "WRAP_KEY", "ATTEST_KEY"},
}


# Key assembly

@dataclass
class KeyConfig:
    app_id: str
    method: MethodSignature
    caller_package: str
    init_callsite: Optional[str] = None
    alias: Optional[str] = None
    purposes: Optional[FrozenSet[str]] = None
    key_size: Optional[int] = None
    block_modes: Optional[Tuple[str, ...]] = None
    encryption_paddings: Optional[Tuple[str, ...]] = None
    signature_paddings: Optional[Tuple[str, ...]] = None
    digests: Optional[Tuple[str, ...]] = None
    strongbox: Optional[bool] = None
    auth_required: Optional[bool] = None
    auth_required_declared: bool = False
    auth_validity_seconds: Optional[int] = None
    randomized_encryption: Optional[bool] = None
    attestation: bool = False
    user_confirmation: Optional[bool] = None
    unlocked_device_required: Optional[bool] = None
    user_presence_required: Optional[bool] = None
    invalidated_by_biometric_enrollment: Optional[bool] = None
    cipher: Optional[str] = None
    reachable: Optional[bool] = None
    completeness: float = 0.0
    setter_sites: List[str] = field(default_factory=list)
    unresolved_setters: List[str] = field(default_factory=list)

    @property
    def is_partial(self) -> bool:
        return self.init_callsite is None

    @property
    def key_ref(self) -> str:
        return self.init_callsite or f"{self.method.render()}#partial"


def normalize_cipher(algorithm: str) -> str:
    """'AES/GCM/NoPadding' -> 'AES', 'DESede' -> '3DES', 'HmacSHA256' -> 'HMAC-SHA256'."""
    name = algorithm.split("/", 1)[0].strip()
    upper = name.upper()
    if upper in ("DESEDE", "TRIPLEDES", "3DES"):
        return "3DES"
    if upper.startswith("HMAC"):
        digest = upper[len("HMAC"):].lstrip("-")
        return f"HMAC-{digest}" if digest else "HMAC"
    return upper


def cipher_family(cipher: str) -> str:
    return "HMAC" if cipher.startswith("HMAC") else cipher


def _str_arg(site: ApiCallSite, index: int) -> Optional[str]:
    value = site.arg(index)
    return value.value if value is not None and value.kind == "Str" else None


def is_keystore_factory(site: ApiCallSite) -> bool:
    return site.callee in KEY_FACTORY_APIS and _str_arg(site, 1) in KEYSTORE_PROVIDERS


def is_keystore_reference(site: ApiCallSite) -> bool:
    """Keystore API site, or a Java provider call naming the Android keystore provider."""
    if site.category in KEYSTORE_CATEGORIES:
        return True
    if site.category == "java-provider":
        return any(arg.value.kind == "Str" and arg.value.value in KEYSTORE_PROVIDERS for arg in site.resolved_args)
    return False


def _apply_setter(config: KeyConfig, site: ApiCallSite) -> bool:
    """Copies one setter's value into the config; returns False when the value is unresolved."""
    config.setter_sites.append(site.callsite_id)
    if site.callee == "kgps.setAttestationChallenge":
        config.attestation = True
        return True
    attr = SETTER_FIELDS.get(site.callee)
    if attr is None:
        return True
    if attr == "auth_required":
        config.auth_required_declared = True
    value = site.arg(0)
    if value is None or not value.is_resolved:
        config.unresolved_setters.append(site.callsite_id)
        return False
    setattr(config, attr, value.value)
    return True


def _fill(config: KeyConfig, init: Optional[ApiCallSite], setters: Sequence[ApiCallSite]):
    valued = 0
    resolved = 0
    for site in sorted(setters, key=lambda s: s.instruction_index):
        ok = _apply_setter(config, site)
        if site.callee in SETTER_FIELDS:
            valued += 1
            resolved += int(ok)
    if init is not None:
        alias = init.arg(0)
        if alias is not None and alias.kind == "Str":
            config.alias = alias.value
        mask = init.arg(1)
        if mask is not None and mask.kind == "Int" and mask.value >= 0:
            config.purposes = decode_purposes(mask.value)
            resolved += 1
    config.completeness = resolved / (valued + 1)


def assemble_key_configs(
    sites: Sequence[ApiCallSite],
    reachability: Optional[Mapping[str, object]] = None,
    include_unreachable: bool = False,
) -> List[KeyConfig]:
    """
    Groups an app's builder sites into key configurations.

    Within one method a setter joins the init whose receiver shares its
    allocation origin, when exactly one init does. The rest form one
    method-scoped partial config. A unique keystore-provider factory call in
    the method supplies the cipher.

    Args:
        sites: Resolved call sites of one app.
        reachability: callsite_id -> ReachabilityResult; sites known to be unreachable are skipped.
        include_unreachable: Keep unreachable sites.

    Returns:
        List[KeyConfig]: Ordered by method, then init position; partial configs last within a method.
    """
    reachability = reachability or {}

    def keep(site: ApiCallSite) -> bool:
        result = reachability.get(site.callsite_id)
        return include_unreachable or result is None or result.reachable

    by_method: Dict[MethodSignature, List[ApiCallSite]] = defaultdict(list)
    for site in sites:
        if keep(site) and (site.category in KEYSTORE_CATEGORIES or site.category == "java-provider"):
            by_method[site.caller].append(site)

    configs: List[KeyConfig] = []
    for method in sorted(by_method, key=MethodSignature.render):
        method_sites = sorted(by_method[method], key=lambda s: s.instruction_index)
        inits = [s for s in method_sites if s.category == "keystore-init"]
        setters = [s for s in method_sites if s.category in KEYSTORE_CATEGORIES and s.category != "keystore-init"]
        factories = [s for s in method_sites if is_keystore_factory(s)]
        cipher = None
        if len(factories) == 1 and _str_arg(factories[0], 0):
            cipher = normalize_cipher(_str_arg(factories[0], 0))

        linked: Dict[str, List[ApiCallSite]] = {init.callsite_id: [] for init in inits}
        orphans = []
        for setter in setters:
            owners = [i for i in inits if i.receiver_origin is not None and i.receiver_origin == setter.receiver_origin]
            if len(owners) == 1:
                linked[owners[0].callsite_id].append(setter)
            else:
                orphans.append(setter)

        app_id = method_sites[0].app_id
        package = method_sites[0].caller_package
        for init in inits:
            config = KeyConfig(app_id=app_id, method=method, caller_package=package, init_callsite=init.callsite_id, cipher=cipher)
            reach = reachability.get(init.callsite_id)
            config.reachable = None if reach is None else reach.reachable
            _fill(config, init, linked[init.callsite_id])
            configs.append(config)
        if orphans:
            config = KeyConfig(app_id=app_id, method=method, caller_package=package, cipher=cipher)
            _fill(config, None, orphans)
            configs.append(config)
    return configs


# Lint

SEVERITIES = ("info", "warn", "high")


@dataclass(frozen=True)
class LintFinding:
    app_id: str
    key_ref: str
    rule_id: str
    severity: str
    message: str

    def to_dict(self) -> Dict:
        return dict(app_id=self.app_id, key_ref=self.key_ref, rule_id=self.rule_id, severity=self.severity, message=self.message)


def _r1(key: KeyConfig) -> Optional[Tuple[str, str]]:
    if key.randomized_encryption is False:
        return "high", "randomized encryption disabled; ciphertexts lose IND-CPA"
    return None


def _r2(key: KeyConfig) -> Optional[Tuple[str, str]]:
    if key.strongbox is False:
        return "info", "StrongBox explicitly disabled"
    return None


def _r3(key: KeyConfig) -> Optional[Tuple[str, str]]:
    if key.cipher in ("3DES", "HMAC-SHA1"):
        return "high", f"legacy algorithm {key.cipher}"
    return None


def _r4(key: KeyConfig) -> Optional[Tuple[str, str]]:
    if key.auth_validity_seconds is not None and 0 < key.auth_validity_seconds <= 3:
        return "info", f"authentication valid for only {key.auth_validity_seconds} s"
    return None


def _r5(key: KeyConfig) -> Optional[Tuple[str, str]]:
    if key.user_confirmation is False:
        return "info", "user confirmation explicitly disabled"
    return None


def _r6(key: KeyConfig) -> Optional[Tuple[str, str]]:
    if not key.cipher or not key.purposes:
        return None
    allowed = ALLOWED_PURPOSES.get(cipher_family(key.cipher))
    if allowed is None:
        return None
    invalid = sorted(p for p in key.purposes if not p.startswith("UNKNOWN") and p not in allowed)
    if invalid:
        return "warn", f"{key.cipher} keys cannot be used for {', '.join(invalid)}"
    return None


LINT_RULES = {"R1": _r1, "R2": _r2, "R3": _r3, "R4": _r4, "R5": _r5, "R6": _r6}


def lint_config(key: KeyConfig) -> List[LintFinding]:
    findings = []
    for rule_id, rule in LINT_RULES.items():
        hit = rule(key)
        if hit:
            severity, message = hit
            findings.append(LintFinding(key.app_id, key.key_ref, rule_id, severity, message))
    return findings


def lint_results(results: Sequence[AppResult], include_unreachable: bool = False) -> List[LintFinding]:
    findings = []
    for result in sorted(results, key=lambda r: r.app_id):
        for key in assemble_key_configs(result.call_sites, result.reachability_by_site(), include_unreachable):
            findings.extend(lint_config(key))
    return findings


# Statistics

@dataclass(frozen=True)
class Fraction:
    numerator: int
    denominator: int

    def __post_init__(self):
        if self.denominator < 0 or self.numerator < 0:
            raise ValueError("fraction terms must be >= 0")
        if self.denominator and self.numerator > self.denominator:
            raise ValueError(f"fraction {self.numerator}/{self.denominator} exceeds 1")

    @property
    def value(self) -> float:
        return self.numerator / self.denominator if self.denominator else 0.0

    @property
    def percent(self) -> float:
        return round(self.value * 100, 2)

    def to_dict(self) -> Dict:
        return {"numerator": self.numerator, "denominator": self.denominator, "percent": self.percent}

    @classmethod
    def from_dict(cls, record: Dict) -> "Fraction":
        return cls(record["numerator"], record["denominator"])


def _fractions(counts: Mapping[str, int], total: int) -> Dict[str, Fraction]:
    return {key: Fraction(counts[key], total) for key in sorted(counts)}


@dataclass
class GenreRow:
    genre: str
    apps: int
    keystore: Fraction
    strongbox: Fraction

    def to_dict(self) -> Dict:
        return {"genre": self.genre, "apps": self.apps, "keystore": self.keystore.to_dict(), "strongbox": self.strongbox.to_dict()}

    @classmethod
    def from_dict(cls, record: Dict) -> "GenreRow":
        return cls(record["genre"], record["apps"], Fraction.from_dict(record["keystore"]), Fraction.from_dict(record["strongbox"]))


@dataclass
class PackageRow:
    package: str
    calls: int
    apps: int
    developers: int

    def to_dict(self) -> Dict:
        return dict(self.__dict__)


@dataclass
class CorpusStats:
    metrics: Dict[str, Fraction] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)
    purpose_distribution: Dict[str, Fraction] = field(default_factory=dict)
    auth_histogram: Dict[str, Fraction] = field(default_factory=dict)
    cipher_distribution: Dict[str, Fraction] = field(default_factory=dict)
    software_cipher_distribution: Dict[str, Fraction] = field(default_factory=dict)
    genre_breakdown: List[GenreRow] = field(default_factory=list)
    top_packages: List[PackageRow] = field(default_factory=list)
    top_strongbox_packages: List[PackageRow] = field(default_factory=list)
    lint_counts: Dict[str, int] = field(default_factory=dict)

    def all_fractions(self) -> List[Tuple[str, Fraction]]:
        rows = list(self.metrics.items())
        for prefix, table in (
            ("purpose", self.purpose_distribution),
            ("auth_validity", self.auth_histogram),
            ("cipher", self.cipher_distribution),
            ("software_cipher", self.software_cipher_distribution),
        ):
            rows.extend((f"{prefix}.{key}", value) for key, value in table.items())
        for row in self.genre_breakdown:
            rows.append((f"genre.{row.genre}.keystore", row.keystore))
            rows.append((f"genre.{row.genre}.strongbox", row.strongbox))
        return rows

    def to_dict(self) -> Dict:
        def table(d):
            return {k: v.to_dict() for k, v in d.items()}

        return {
            "metrics": table(self.metrics),
            "counts": dict(self.counts),
            "purpose_distribution": table(self.purpose_distribution),
            "auth_histogram": table(self.auth_histogram),
            "cipher_distribution": table(self.cipher_distribution),
            "software_cipher_distribution": table(self.software_cipher_distribution),
            "genre_breakdown": [r.to_dict() for r in self.genre_breakdown],
            "top_packages": [r.to_dict() for r in self.top_packages],
            "top_strongbox_packages": [r.to_dict() for r in self.top_strongbox_packages],
            "lint_counts": dict(self.lint_counts),
        }

    @classmethod
    def from_dict(cls, record: Dict) -> "CorpusStats":
        def table(d):
            return {k: Fraction.from_dict(v) for k, v in d.items()}

        return cls(
            metrics=table(record["metrics"]),
            counts=dict(record["counts"]),
            purpose_distribution=table(record["purpose_distribution"]),
            auth_histogram=table(record["auth_histogram"]),
            cipher_distribution=table(record["cipher_distribution"]),
            software_cipher_distribution=table(record["software_cipher_distribution"]),
            genre_breakdown=[GenreRow.from_dict(r) for r in record["genre_breakdown"]],
            top_packages=[PackageRow(**r) for r in record["top_packages"]],
            top_strongbox_packages=[PackageRow(**r) for r in record["top_strongbox_packages"]],
            lint_counts=dict(record["lint_counts"]),
        )


def auth_bucket(seconds: int) -> str:
    if seconds <= 0:
        return "per-use"
    if seconds <= 3:
        return "≤3 s"
    if seconds == 5:
        return "5 s"
    if seconds == 3600:
        return "1 h"
    return "other"


def randomized_encryption_estimate(refs: float, false_fraction: float, init_calls: float) -> float:
    """Share of keys with randomized encryption disabled, scaled from the resolvable subset of calls."""
    if init_calls <= 0:
        raise ValueError("init_calls must be > 0")
    return refs * false_fraction / init_calls


def _top_rows(entries: Iterable[PackageEntry], count_of, top_n: int) -> List[PackageRow]:
    rows = [
        PackageRow(e.name, count_of(e), len(e.referencing_apps), len(e.developers))
        for e in entries
        if count_of(e) > 0
    ]
    rows.sort(key=lambda r: (-r.calls, r.package))
    return rows[:top_n]


def compute_stats(
    manifest: CorpusManifest,
    labels: Optional[Mapping[str, str]] = None,
    results: Optional[Sequence[AppResult]] = None,
    top_n: int = 10,
) -> CorpusStats:
    """
    Corpus metrics, every fraction with explicit numerator and denominator.

    Args:
        manifest (CorpusManifest): Apps and package index.
        labels (Mapping[str, str], optional): app_id -> sensitivity class; label metrics are skipped without it.
        results (Sequence[AppResult], optional): Preloaded results; read from the manifest otherwise.
        top_n (int): Rows in the top package tables.

    Returns:
        CorpusStats: The computed statistics.

    Raises:
        EmptyCorpus: If the manifest lists no apps.
    """
    if not manifest.apps:
        raise EmptyCorpus("manifest lists no apps")
    if results is None:
        results = manifest.load_results()
    listed = {a.app_id for a in manifest.apps}
    results = sorted((r for r in results if r.app_id in listed), key=lambda r: r.app_id)
    if not results:
        raise EmptyCorpus("no results for the manifest's apps")

    stats = CorpusStats()
    metrics = stats.metrics
    counts = stats.counts
    n_apps = len(results)

    all_sites = [s for r in results for s in r.call_sites]
    inits = [s for s in all_sites if s.category == "keystore-init"]
    n_inits = len(inits)
    keystore_apps = {r.app_id for r in results if any(is_keystore_reference(s) for s in r.call_sites)}
    strongbox_sites = [s for s in all_sites if s.category == "strongbox"]
    strongbox_apps = {s.app_id for s in strongbox_sites}

    # Adoption
    metrics["keystore_apps"] = Fraction(len(keystore_apps), n_apps)
    if labels is not None:
        sensitive = {r.app_id for r in results if labels.get(r.app_id) == SENSITIVE}
        metrics["keystore_apps_sensitive"] = Fraction(len(keystore_apps & sensitive), len(sensitive))
        metrics["strongbox_apps_sensitive"] = Fraction(len(strongbox_apps & sensitive), len(sensitive))
        counts["sensitive_apps"] = len(sensitive)
        counts["labelled_apps"] = sum(1 for r in results if r.app_id in labels)

    # StrongBox
    metrics["strongbox_apps"] = Fraction(len(strongbox_apps), len(keystore_apps))
    strongbox_values = [s.arg(0) for s in strongbox_sites]
    resolved_sb = [v for v in strongbox_values if v is not None and v.kind == "Bool"]
    true_sb = sum(1 for v in resolved_sb if v.value)
    metrics["strongbox_true"] = Fraction(true_sb, len(resolved_sb))
    metrics["strongbox_false"] = Fraction(len(resolved_sb) - true_sb, len(resolved_sb))
    counts["strongbox_calls"] = len(strongbox_sites)
    counts["strongbox_unresolved_args"] = len(strongbox_sites) - len(resolved_sb)

    requesting = set()
    resolved_any = set()
    for site in strongbox_sites:
        value = site.arg(0)
        if value is not None and value.kind == "Bool":
            resolved_any.add(site.app_id)
            if value.value:
                requesting.add(site.app_id)
    metrics["strongbox_requested_apps"] = Fraction(len(requesting), len(strongbox_apps))
    counts["strongbox_unresolved_only_apps"] = len(strongbox_apps - resolved_any)

    # Package parties
    index = manifest.package_index
    party_counts = Counter()
    for site in inits:
        entry = index.get(site.caller_package)
        party_counts[entry.party if entry is not None and entry.party else "withheld"] += 1
    for party in (FIRST_PARTY, THIRD_PARTY, EXCLUDED_OBFUSCATED, "withheld"):
        metrics[f"init_party.{party}"] = Fraction(party_counts[party], n_inits)
    third = [e for e in index.values() if e.party == THIRD_PARTY]
    stats.top_packages = _top_rows(third, lambda e: e.init_calls, top_n)
    stats.top_strongbox_packages = _top_rows(third, lambda e: e.strongbox_calls, top_n)

    party_map = build_party_map(results, int(manifest.config_snapshot.get("obfuscation_min_component", 3)))
    sb_party = Counter(party_map.get(s.caller_package) or "withheld" for s in strongbox_sites)
    for party in (FIRST_PARTY, THIRD_PARTY, EXCLUDED_OBFUSCATED, "withheld"):
        metrics[f"strongbox_party.{party}"] = Fraction(sb_party[party], len(strongbox_sites))

    # Purposes
    purposes = Counter()
    for site in inits:
        mask = site.arg(1)
        if mask is not None and mask.kind == "Int" and mask.value >= 0:
            purposes[purpose_label(decode_purposes(mask.value))] += 1
    stats.purpose_distribution = _fractions(purposes, sum(purposes.values()))
    counts["init_calls"] = n_inits
    counts["init_purposes_resolved"] = sum(purposes.values())

    # Per-key settings count each init once, whatever number of setters feed it.
    keys = [
        k for r in results
        for k in assemble_key_configs(r.call_sites, r.reachability_by_site(), include_unreachable=True)
    ]
    init_keys = [k for k in keys if not k.is_partial]
    partial_keys = [k for k in keys if k.is_partial]

    # User authentication
    metrics["auth_required"] = Fraction(sum(1 for k in init_keys if k.auth_required is True), n_inits)
    counts["auth_required_partial"] = sum(1 for k in partial_keys if k.auth_required is True)
    buckets = Counter({bucket: 0 for bucket in AUTH_BUCKETS})
    for site in all_sites:
        if site.callee in VALIDITY_APIS:
            value = site.arg(0)
            if value is not None and value.kind == "Int":
                buckets[auth_bucket(value.value)] += 1
    total_validity = sum(buckets.values())
    stats.auth_histogram = {b: Fraction(buckets[b], total_validity) for b in AUTH_BUCKETS}
    confirmation = [s.arg(0) for s in all_sites if s.callee == "kgps.setUserConfirmationRequired"]
    confirmation = [v for v in confirmation if v is not None and v.kind == "Bool"]
    metrics["user_confirmation_enabled"] = Fraction(sum(1 for v in confirmation if v.value), len(confirmation))

    # Randomized encryption
    re_values = [s.arg(0) for s in all_sites if s.callee == "kgps.setRandomizedEncryptionRequired"]
    re_resolved = [v for v in re_values if v is not None and v.kind == "Bool"]
    re_false = sum(1 for v in re_resolved if not v.value)
    metrics["randomized_encryption_disabled"] = Fraction(sum(1 for k in init_keys if k.randomized_encryption is False), n_inits)
    metrics["randomized_encryption_false_share"] = Fraction(re_false, len(re_resolved))
    counts["randomized_encryption_calls"] = len(re_values)

    # Attestation
    metrics["attestation"] = Fraction(sum(1 for k in init_keys if k.attestation), n_inits)
    counts["attestation_calls"] = sum(1 for s in all_sites if s.category == "attestation")

    # Ciphers
    ciphers = Counter()
    software = Counter()
    for site in all_sites:
        algorithm = _str_arg(site, 0)
        if not algorithm:
            continue
        if is_keystore_factory(site):
            ciphers[normalize_cipher(algorithm)] += 1
        elif site.callee in SOFTWARE_FACTORY_APIS:
            provider = _str_arg(site, 1)
            if site.arg(1) is None or (provider is not None and provider not in KEYSTORE_PROVIDERS):
                software[normalize_cipher(algorithm)] += 1
    stats.cipher_distribution = _fractions(ciphers, sum(ciphers.values()))
    stats.software_cipher_distribution = _fractions(software, sum(software.values()))

    # Genres
    by_genre: Dict[str, List[str]] = defaultdict(list)
    for result in results:
        by_genre[result.genre].append(result.app_id)
    for genre in sorted(by_genre):
        apps = set(by_genre[genre])
        stats.genre_breakdown.append(
            GenreRow(
                genre=genre,
                apps=len(apps),
                keystore=Fraction(len(apps & keystore_apps), len(apps)),
                strongbox=Fraction(len(apps & strongbox_apps), len(apps)),
            )
        )

    # Reachability and assembly
    reach_known = 0
    reach_true = 0
    unreachable_sites = 0
    for result in results:
        by_site = result.reachability_by_site()
        for site in result.call_sites:
            reach = by_site.get(site.callsite_id)
            if reach is None:
                continue
            unreachable_sites += int(not reach.reachable)
            if site.category == "keystore-init":
                reach_known += 1
                reach_true += int(reach.reachable)
    metrics["init_reachable"] = Fraction(reach_true, reach_known)
    counts["unreachable_sites"] = unreachable_sites

    lint_counts = Counter({rule: 0 for rule in LINT_RULES})
    configs = 0
    partial = 0
    for result in results:
        keys = assemble_key_configs(result.call_sites, result.reachability_by_site())
        configs += len(keys)
        partial += sum(1 for k in keys if k.is_partial)
        for key in keys:
            for finding in lint_config(key):
                lint_counts[finding.rule_id] += 1
    stats.lint_counts = dict(sorted(lint_counts.items()))
    counts["key_configs"] = configs
    counts["partial_key_configs"] = partial

    counts["apps"] = n_apps
    counts["keystore_apps"] = len(keystore_apps)
    counts["apps_with_init"] = len({s.app_id for s in inits})
    counts["third_party_packages"] = len(third)
    logger.info("stats over {} apps: {} keystore apps, {} init calls", n_apps, len(keystore_apps), n_inits)
    return stats
