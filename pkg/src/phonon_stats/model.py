"""System parameters and the dressed-state frame.

All frequencies and rates are stored in units of the spontaneous emission
rate gamma, so ``SystemParams.gamma`` is always 1 after construction.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

from scipy import constants

log = logging.getLogger(__name__)

# 2*Omega_bar below this many gamma and the dressed dissipator is unreliable
SECULAR_VALIDITY_RATIO = 10.0


class Mode(str, enum.Enum):
    SECULAR = "secular"
    BEYOND = "beyond"

    @classmethod
    def parse(cls, value: "Mode | str") -> "Mode":
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "secular": cls.SECULAR,
            "beyond": cls.BEYOND,
            "beyond_secular": cls.BEYOND,
            "beyondsecular": cls.BEYOND,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown mode {value!r}") from None


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Laboratory-frame inputs, normalized so that gamma == 1.

    rabi is Omega (half the Rabi frequency 2*Omega), detuning is
    Delta = omega_qd - omega_L.  Passing ``gamma != 1`` rescales every
    dimensional field by 1/gamma on construction.
    """

    rabi: float
    detuning: float
    omega_ph: float
    g: float
    gamma: float = 1.0
    gamma_c: float = 0.0
    kappa: float = 1.0
    nbar: float = 0.0

    def __post_init__(self) -> None:
        for name in ("rabi", "detuning", "omega_ph", "g", "gamma", "gamma_c", "kappa", "nbar"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.rabi <= 0:
            raise ParameterError(f"rabi must be > 0, got {self.rabi}")
        if self.omega_ph <= 0:
            raise ParameterError(f"omega_ph must be > 0, got {self.omega_ph}")
        if self.g < 0:
            raise ParameterError(f"g must be >= 0, got {self.g}")
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if self.gamma_c < 0:
            raise ParameterError(f"gamma_c must be >= 0, got {self.gamma_c}")
        if self.kappa <= 0:
            raise ParameterError(f"kappa must be > 0, got {self.kappa}")
        if self.nbar < 0:
            raise ParameterError(f"nbar must be >= 0, got {self.nbar}")

        if self.gamma != 1.0:
            s = 1.0 / self.gamma
            for name in ("rabi", "detuning", "omega_ph", "g", "gamma_c", "kappa"):
                object.__setattr__(self, name, getattr(self, name) * s)
            object.__setattr__(self, "gamma", 1.0)

    @classmethod
    def from_ratios(
        cls,
        two_omega: float,
        detuning_ratio: float,
        kappa: float,
        nbar: float,
        g: float,
        omega_ph: float,
        gamma_c: float,
    ) -> "SystemParams":
        """Build from the dimensionless ratios 2*Omega/gamma, Delta/(2*Omega), ..."""
        rabi = 0.5 * two_omega
        return cls(
            rabi=rabi,
            detuning=detuning_ratio * two_omega,
            omega_ph=omega_ph,
            g=g,
            gamma_c=gamma_c,
            kappa=kappa,
            nbar=nbar,
        )

    @classmethod
    def from_quality_factor(cls, *, q_factor: float, **kwargs) -> "SystemParams":
        """kappa = omega_ph / Q."""
        if q_factor <= 0:
            raise ParameterError(f"quality factor must be > 0, got {q_factor}")
        return cls(kappa=kwargs["omega_ph"] / q_factor, **kwargs)

    @property
    def two_omega(self) -> float:
        return 2.0 * self.rabi

    @property
    def detuning_ratio(self) -> float:
        return self.detuning / (2.0 * self.rabi)


@dataclass(frozen=True)
class DressedFrame:
    theta: float
    omega_bar: float
    delta_bar: float
    beta: float
    delta_eff: float
    gamma_plus: float
    gamma_minus: float
    gamma_zero: float
    mode: Mode
    sin2theta: float
    cos2theta: float
    # g*sin(2 theta)/2, magnitude of the slow-term QD-phonon coupling
    coupling: float

    @property
    def coherence_decay(self) -> float:
        """gamma_+ + gamma_- + 4 gamma_0."""
        return self.gamma_plus + self.gamma_minus + 4.0 * self.gamma_zero


def dress(params: SystemParams, mode: Mode | str = Mode.BEYOND) -> DressedFrame:
    """Dressed-state transformation plus the fast-term shifts.

    The mixing angle uses atan2(2*Omega, Delta), so 2*theta lies in (0, pi)
    and sin(2*theta) = Omega/Omega_bar > 0 for either sign of the detuning.
    In secular mode delta_bar and beta are exactly zero.
    """
    mode = Mode.parse(mode)
    rabi, det = params.rabi, params.detuning
    omega_bar = math.hypot(rabi, 0.5 * det)
    two_theta = math.atan2(2.0 * rabi, det)
    theta = 0.5 * two_theta
    sin2 = rabi / omega_bar
    cos2 = 0.5 * det / omega_bar

    denom = params.omega_ph + 2.0 * omega_bar
    if denom == 0.0:
        raise ParameterError("omega_ph + 2*Omega_bar vanishes")

    if mode is Mode.BEYOND:
        g2 = params.g * params.g
        beta = g2 * sin2 * sin2 / (4.0 * denom)
        delta_bar = 0.5 * g2 * (cos2 / params.omega_ph - sin2 * sin2 / (4.0 * denom))
    else:
        beta = 0.0
        delta_bar = 0.0

    if 2.0 * omega_bar < SECULAR_VALIDITY_RATIO * params.gamma:
        log.warning(
            "2*Omega_bar = %.4g gamma is below %.0f gamma; the dressed-state "
            "dissipator assumes 2*Omega_bar >> gamma",
            2.0 * omega_bar,
            SECULAR_VALIDITY_RATIO,
        )

    # cos^2(theta) = (1 + cos 2theta)/2 avoids cancellation for theta near pi/2
    cos_sq = 0.5 * (1.0 + cos2)
    sin_sq = 0.5 * (1.0 - cos2)
    gamma, gamma_c = params.gamma, params.gamma_c
    gamma_plus = gamma * cos_sq * cos_sq + 0.25 * gamma_c * sin2 * sin2
    gamma_minus = gamma * sin_sq * sin_sq + 0.25 * gamma_c * sin2 * sin2
    gamma_zero = 0.25 * (gamma * sin2 * sin2 + gamma_c * cos2 * cos2)

    return DressedFrame(
        theta=theta,
        omega_bar=omega_bar,
        delta_bar=delta_bar,
        beta=beta,
        delta_eff=params.omega_ph - 2.0 * omega_bar + 2.0 * delta_bar,
        gamma_plus=gamma_plus,
        gamma_minus=gamma_minus,
        gamma_zero=gamma_zero,
        mode=mode,
        sin2theta=sin2,
        cos2theta=cos2,
        coupling=0.5 * params.g * sin2,
    )


def thermal_occupation(omega_ph: float, temperature: float, unit_scale: float = 1.0) -> float:
    """Bose-Einstein occupation at angular frequency omega_ph * unit_scale [rad/s].

    ``omega_ph`` is in units of gamma and ``unit_scale`` is gamma in s^-1.
    Returns exactly 0 at zero temperature.
    """
    if omega_ph <= 0:
        raise ParameterError(f"omega_ph must be > 0, got {omega_ph}")
    if temperature < 0:
        raise ParameterError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return 0.0
    x = constants.hbar * omega_ph * unit_scale / (constants.k * temperature)
    return 1.0 / math.expm1(x)
