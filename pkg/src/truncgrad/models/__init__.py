from .gm1 import GM1Chain, GM1Params, gm1_analytic, gm1_xi
from .jackson import JacksonParams, JacksonRates, jackson_analytic, jackson_chain
