// Generated by poisson_oracle.py (mpmath at 60 digits).
// (k, mean, pmf, cdf, sf)
#[rustfmt::skip]
#[allow(clippy::excessive_precision)]
const ORACLE: [(u64, f64, f64, f64, f64); 21] = [
    (0, 0.5, 0.6065306597126334236, 0.6065306597126334236, 0.3934693402873665764),
    (5, 2.5, 0.066800942890542639298, 0.95797896180469388165, 0.042021038195306118354),
    (2, 2.0, 0.27067056647322538379, 0.67667641618306345947, 0.32332358381693654053),
    (30, 30.0, 0.072634526471591495193, 0.54835151257791142615, 0.45164848742208857385),
    (31, 30.5, 0.07116911296898006989, 0.58325332493272752348, 0.41674667506727247652),
    (50, 40.0, 0.017707017552636246814, 0.94737195089324129238, 0.052628049106758707623),
    (99, 36.0, 2.9467451182640905538e-18, 0.99999999999999999836, 1.6435505160996095963e-18),
    (199, 180.0, 0.010724156141534887462, 0.9251419650158404181, 0.074858034984159581898),
    (200, 180.0, 0.0096517405273813987158, 0.93479370554322181682, 0.065206294456778183182),
    (150, 144.0, 0.028778954283288994426, 0.70934205421545901571, 0.29065794578454098429),
    (99, 108.0, 0.027236048128336019701, 0.20818509636949688515, 0.79181490363050311485),
    (1000, 1000.0, 0.012614611348721499718, 0.50840936716850599121, 0.49159063283149400879),
    (950, 1000.0, 0.0036296190663045958075, 0.057836292955323206134, 0.94216370704467679387),
    (1100, 1000.0, 0.000094989442422995075762, 0.99913235903655643791, 0.00086764096344356208518),
    (800, 1000.0, 6.5831516418805085782e-12, 3.2298887227290215359e-11, 0.99999999996770111277),
    (5000, 4990.5, 0.0055910496112686854336, 0.55719733010570757439, 0.44280266989429242561),
    (9000, 10000.0, 1.4019028953083584065e-25, 1.3896350906594242908e-24, 1.0),
    (9800, 10000.0, 0.00053809030579833027693, 0.022749222010894860161, 0.97725077798910513984),
    (10000, 10000.0, 0.0039893895589628256487, 0.50265958121900762527, 0.49734041878099237473),
    (10200, 10000.0, 0.00054169002820292172986, 0.97725075799090403947, 0.022749242009095960534),
    (11000, 10000.0, 3.590505496567451681e-24, 1.0, 3.5521752554362693477e-23),
];
