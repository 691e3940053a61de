# ядро: индексы, модель Дирихле, B(Y), PP
